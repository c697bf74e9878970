#include "flashpoint/rgrwf/dirac.hpp"

#include <vector>

namespace flashpoint::rgrwf {

DiracLattice::DiracLattice(DiracLatticeParams params) : params_(std::move(params)) {
  const int n = params_.n_x;
  if (n < 8) throw std::invalid_argument("DiracLattice: n_x too small");
  dx_ = (params_.x_max - params_.x_min) / n;

  // H = sigma_1 p + m sigma_3 + e A_0; p by the 4th-order stencil
  // (psi_{j-2} - 8 psi_{j-1} + 8 psi_{j+1} - psi_{j+2}) / (12 dx) * (-i).
  const double c1 = 2.0 / (3.0 * dx_);
  const double c2 = -1.0 / (12.0 * dx_);
  using Trip = Eigen::Triplet<Complex>;
  std::vector<Trip> h;
  h.reserve(static_cast<size_t>(n) * 12);
  auto wrap = [n](int j) { return (j % n + n) % n; };
  for (int j = 0; j < n; ++j) {
    const double m = params_.mass;
    const double v = params_.a0 ? params_.a0(x(j)) : 0.0;
    // Diagonal: m sigma_3 + V.
    h.emplace_back(2 * j, 2 * j, Complex(m + v, 0));
    h.emplace_back(2 * j + 1, 2 * j + 1, Complex(-m + v, 0));
    // sigma_1 p: couples components a <-> b across neighbors.
    for (auto [off, coef] : {std::pair<int, double>{1, c1}, {-1, -c1}, {2, c2}, {-2, -c2}}) {
      int k = wrap(j + off);
      Complex val = -kImag * coef;  // (-i) * finite-difference coefficient
      h.emplace_back(2 * j, 2 * k + 1, val);
      h.emplace_back(2 * j + 1, 2 * k, val);
    }
  }
  Eigen::SparseMatrix<Complex> ham(2 * n, 2 * n);
  ham.setFromTriplets(h.begin(), h.end());

  Eigen::SparseMatrix<Complex> id(2 * n, 2 * n);
  id.setIdentity();
  Complex half = kImag * (0.5 * params_.dt);
  plus_ = id + half * ham;
  minus_ = id - half * ham;
  plus_.makeCompressed();
  minus_.makeCompressed();
  plus_lu_.compute(plus_);
  minus_lu_.compute(minus_);
  if (plus_lu_.info() != Eigen::Success || minus_lu_.info() != Eigen::Success)
    throw std::runtime_error("DiracLattice: Crank-Nicolson factorization failed");
}

int DiracLattice::column_of(double xx) const {
  int j = static_cast<int>(std::floor((xx - params_.x_min) / dx_));
  return std::min(std::max(j, 0), params_.n_x - 1);
}

void DiracLattice::step(SliceState& s, bool forward) const {
  if (forward) {
    Vector rhs = minus_ * s.v;
    s.v = plus_lu_.solve(rhs);
    s.t += params_.dt;
  } else {
    Vector rhs = plus_ * s.v;
    s.v = minus_lu_.solve(rhs);
    s.t -= params_.dt;
  }
}

void DiracLattice::step_block(Eigen::MatrixXcd& v, bool forward) const {
  if (forward) {
    Eigen::MatrixXcd rhs = minus_ * v;
    v = plus_lu_.solve(rhs);
  } else {
    Eigen::MatrixXcd rhs = plus_ * v;
    v = minus_lu_.solve(rhs);
  }
}

double DiracLattice::slice_norm_sq(const SliceState& s) const { return dx_ * s.v.squaredNorm(); }

double DiracLattice::edge_mass(const SliceState& s, double fraction) const {
  const int n = params_.n_x;
  int margin = std::max(1, static_cast<int>(n * fraction));
  double acc = 0.0;
  for (int j = 0; j < margin; ++j) {
    acc += std::norm(s.v(2 * j)) + std::norm(s.v(2 * j + 1));
    int k = n - 1 - j;
    acc += std::norm(s.v(2 * k)) + std::norm(s.v(2 * k + 1));
  }
  return acc * dx_;
}

SliceState DiracLattice::gaussian_packet(double t0, double center, double width, double momentum,
                                         Complex spin_mix) const {
  SliceState s;
  s.t = t0;
  s.v = Vector::Zero(2 * params_.n_x);
  const double a = 1.0 / std::sqrt(1.0 + std::norm(spin_mix));
  for (int j = 0; j < params_.n_x; ++j) {
    double d = x(j) - center;
    Complex amp = std::exp(Complex(-d * d / (4.0 * width * width), momentum * d));
    s.v(2 * j) = a * amp;
    s.v(2 * j + 1) = a * spin_mix * amp;
  }
  s.v /= std::sqrt(slice_norm_sq(s));
  return s;
}

double SurfaceState::point_density(int j) const {
  double n_t, n_x;
  surf.normal(j, n_t, n_x);
  const Eigen::Vector2cd& p = values[j];
  double plain = p.squaredNorm();
  double cross = 2.0 * std::real(std::conj(p(0)) * p(1));
  return n_t * plain - n_x * cross;  // psi^dag (n^0 I - n^1 sigma_1) psi
}

double SurfaceState::norm_sq() const {
  double acc = 0.0;
  for (int j = 0; j < surf.n; ++j) acc += surf.measure_weight(j) * point_density(j);
  return acc;
}

SurfaceState restrict_to_surface(const DiracLattice& lat, SliceState psi, const Hyperboloid& surf,
                                 double pending_tol) {
  SurfaceState out;
  out.surf = surf;
  out.values.assign(surf.n, Eigen::Vector2cd::Zero());
  std::vector<double> tau(surf.n);
  double tau_min = 1e300;
  for (int j = 0; j < surf.n; ++j) {
    tau[j] = surf.time_at(surf.u(j));
    tau_min = std::min(tau_min, tau[j]);
  }
  // March down first if the apex lies below the current slice.
  while (psi.t > tau_min) lat.step(psi, false);

  std::vector<bool> done(surf.n, false);
  int remaining = surf.n;
  SliceState prev = psi;
  const double dx = lat.dx();
  while (remaining > 0) {
    SliceState next = prev;
    lat.step(next, true);
    for (int j = 0; j < surf.n; ++j) {
      if (done[j]) continue;
      if (tau[j] > prev.t - 1e-12 && tau[j] <= next.t + 1e-12) {
        double theta = (tau[j] - prev.t) / lat.dt();
        theta = std::min(1.0, std::max(0.0, theta));
        out.values[j] = (1.0 - theta) * prev.v.segment<2>(2 * j).eval() +
                        theta * next.v.segment<2>(2 * j).eval();
        done[j] = true;
        --remaining;
      }
    }
    if (remaining > 0) {
      // Stop when all pending columns carry negligible mass.
      double pending = 0.0;
      for (int j = 0; j < surf.n; ++j)
        if (!done[j]) pending += dx * next.v.segment<2>(2 * j).squaredNorm();
      if (pending < pending_tol) break;
    }
    prev = std::move(next);
  }
  return out;
}

}  // namespace flashpoint::rgrwf
