#include "flashpoint/reconstruct.hpp"

#include <map>
#include <sstream>
#include <tuple>

#include "flashpoint/engine.hpp"
#include "flashpoint/opcore.hpp"

namespace flashpoint {

DensityFamily densities_from_model(const GrwfModel& model, double t0, int n_max) {
  DensityFamily fam;
  fam.space = model.space;
  fam.t0 = t0;
  fam.n_max = n_max;
  fam.dim = model.hilbert_dim;
  const GrwfModel m = model;
  fam.e = [m, t0](const History& f) -> Matrix {
    Matrix l = ln_chain(m, f, t0);
    return l.adjoint() * l;
  };
  return fam;
}

namespace {

struct BranchKey {
  std::vector<std::tuple<int, double, int>> items;
  bool operator<(const BranchKey& o) const { return items < o.items; }
  static BranchKey of(const History& f) {
    BranchKey k;
    for (const auto& z : f) k.items.emplace_back(z.q, z.t, z.label);
    return k;
  }
};

std::string describe_history(const History& f) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < f.size(); ++i) {
    if (i) os << ", ";
    os << "(q=" << f[i].q << ", t=" << f[i].t << ", i=" << f[i].label << ")";
  }
  os << "]";
  return os.str();
}

Matrix safe_inverse(const Matrix& a, double floor, const History& f, const char* what) {
  if (min_singular_value(a) <= floor)
    throw SingularDensity(std::string(what) + " not bijective at history " + describe_history(f));
  return a.inverse();
}

// The densities vanish on the measure-zero boundary t = t_n (time-ordering
// indicator); quadrature and ODE nodes that land exactly on the boundary use
// the right-sided limit instead.
double open_time(double t, double t_n) {
  return t > t_n ? t : t_n + 1e-9 * (1.0 + std::abs(t_n));
}

// Integral over cells of E_{#f+1}(f + z at time t).
Matrix cell_integral(const DensityFamily& fam, const History& f, double t) {
  double t_n = f.empty() ? fam.t0 : f.back().t;
  double tt = open_time(t, t_n);
  Matrix acc = Matrix::Zero(fam.dim, fam.dim);
  for (int label = 0; label < fam.space.n_labels; ++label)
    for (int q = 0; q < fam.space.n_q(); ++q) {
      History fz = f;
      fz.push_back(FlashRecord::flash(q, tt, label));
      acc += fam.space.dq * fam.e(fz);
    }
  return acc;
}

// Finite part integral_{a}^{b} of the cell integral, composite Gauss-Legendre.
Matrix finite_part(const DensityFamily& fam, const History& f, double a, double b,
                   const ReconstructionSpec& spec) {
  Matrix acc = Matrix::Zero(fam.dim, fam.dim);
  int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 1.0)));
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
    for (auto [t, w] : gauss_legendre(spec.gl_nodes, a + p * width, a + (p + 1) * width))
      acc += w * cell_integral(fam, f, t);
  return acc;
}

class SqrtPlusBuilder {
 public:
  SqrtPlusBuilder(const DensityFamily& fam, const ReconstructionSpec& spec)
      : fam_(fam), spec_(spec) {}

  Matrix l(const History& f) {
    if (f.empty()) return Matrix::Identity(fam_.dim, fam_.dim);
    BranchKey key = BranchKey::of(f);
    auto it = l_cache_.find(key);
    if (it != l_cache_.end()) return it->second;
    History prev(f.begin(), f.end() - 1);
    const FlashRecord& z = f.back();
    Matrix value = c(prev, z) * w(prev, z.t) * l(prev);
    l_cache_.emplace(key, value);
    return value;
  }

  // Tail integral from t to infinity of the cell integral, through the
  // consistency identity: E_n(f) minus the finite part on [t_n, t].
  Matrix tail(const History& f, double t) {
    Matrix e_n = f.empty() ? Matrix::Identity(fam_.dim, fam_.dim) : fam_.e(f);
    double t_n = f.empty() ? fam_.t0 : f.back().t;
    return e_n - finite_part(fam_, f, t_n, t, spec_);
  }

  Matrix w(const History& f, double t) {
    Matrix l_inv = safe_inverse(l(f), spec_.bijective_floor, f, "L_n");
    Matrix core = l_inv.adjoint() * tail(f, t) * l_inv;
    if (min_singular_value(core) <= spec_.bijective_floor)
      throw SingularDensity("tail integral not bijective at history " + describe_history(f));
    return positive_sqrt(symmetrized(core), 1e-8);
  }

  Matrix lambda(const History& f, const FlashRecord& z) {
    History fz = f;
    fz.push_back(z);
    Matrix e_next = fam_.e(fz);
    if (min_singular_value(e_next) <= spec_.bijective_floor)
      throw SingularDensity("E_{n+1} not bijective at history " + describe_history(fz));
    Matrix l_inv = safe_inverse(l(f), spec_.bijective_floor, f, "L_n");
    Matrix w_inv = safe_inverse(w(f, z.t), spec_.bijective_floor, f, "W^t");
    return w_inv * l_inv.adjoint() * e_next * l_inv * w_inv;
  }

  Matrix c(const History& f, const FlashRecord& z) {
    return positive_sqrt(symmetrized(lambda(f, z)), 1e-8);
  }

 private:
  DensityFamily fam_;
  ReconstructionSpec spec_;
  std::map<BranchKey, Matrix> l_cache_;
};

class HeisenbergPlusBuilder {
 public:
  HeisenbergPlusBuilder(const DensityFamily& fam, const ReconstructionSpec& spec)
      : fam_(fam), spec_(spec) {}

  Matrix l(const History& f) {
    if (f.empty()) return Matrix::Identity(fam_.dim, fam_.dim);
    BranchKey key = BranchKey::of(f);
    auto it = l_cache_.find(key);
    if (it != l_cache_.end()) return it->second;
    History prev(f.begin(), f.end() - 1);
    const FlashRecord& z = f.back();
    Matrix value = c(prev, z) * w(prev, z.t) * l(prev);
    l_cache_.emplace(key, value);
    return value;
  }

  // RK4 on dW/dt = -1/2 W^{-*} Mtilde(t), Mtilde = L^{-*} cell_integral L^{-1},
  // from W(t_n) = I, with step = time_grid_step / 4.
  Matrix w(const History& f, double t) {
    double t_n = f.empty() ? fam_.t0 : f.back().t;
    if (t < t_n) return Matrix::Zero(fam_.dim, fam_.dim);
    Matrix l_inv = safe_inverse(l(f), spec_.bijective_floor, f, "L_n");
    Matrix l_inv_adj = l_inv.adjoint();
    auto rhs = [&](double tt, const Matrix& w_cur) -> Matrix {
      Matrix m = l_inv_adj * cell_integral(fam_, f, tt) * l_inv;
      Matrix w_inv_adj =
          safe_inverse(w_cur, spec_.bijective_floor, f, "W (during ODE)").adjoint();
      return -0.5 * (w_inv_adj * m);
    };
    const double h_target = spec_.time_grid_step / 4.0;
    const int steps = std::max(1, static_cast<int>(std::ceil((t - t_n) / h_target)));
    const double h = (t - t_n) / steps;
    Matrix w_cur = Matrix::Identity(fam_.dim, fam_.dim);
    double tc = t_n;
    for (int k = 0; k < steps; ++k) {
      Matrix k1 = rhs(tc, w_cur);
      Matrix k2 = rhs(tc + 0.5 * h, w_cur + 0.5 * h * k1);
      Matrix k3 = rhs(tc + 0.5 * h, w_cur + 0.5 * h * k2);
      Matrix k4 = rhs(tc + h, w_cur + h * k3);
      w_cur += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      tc += h;
    }
    return w_cur;
  }

  Matrix lambda(const History& f, const FlashRecord& z) {
    History fz = f;
    fz.push_back(z);
    Matrix e_next = fam_.e(fz);
    if (min_singular_value(e_next) <= spec_.bijective_floor)
      throw SingularDensity("E_{n+1} not bijective at history " + describe_history(fz));
    Matrix l_inv = safe_inverse(l(f), spec_.bijective_floor, f, "L_n");
    Matrix w_inv = safe_inverse(w(f, z.t), spec_.bijective_floor, f, "W^t");
    return w_inv.adjoint() * l_inv.adjoint() * e_next * l_inv * w_inv;
  }

  Matrix c(const History& f, const FlashRecord& z) {
    return positive_sqrt(symmetrized(lambda(f, z)), 1e-7);
  }

 private:
  DensityFamily fam_;
  ReconstructionSpec spec_;
  std::map<BranchKey, Matrix> l_cache_;
};

template <class Builder>
ReconstructedOperators package(std::shared_ptr<Builder> b, const DensityFamily& fam) {
  ReconstructedOperators out;
  out.w = [b](const History& f, double t) { return b->w(f, t); };
  out.c = [b](const History& f, const FlashRecord& z) { return b->c(f, z); };
  out.l = [b](const History& f) { return b->l(f); };

  GrwfModel m;
  m.tier = Tier::PastDependent;
  m.space = fam.space;
  m.hilbert_dim = fam.dim;
  m.autonomous = false;
  m.collapse_op = [b](const History& f, int q, double t, int label) {
    return b->c(f, FlashRecord::flash(q, t, label));
  };
  const int dim = fam.dim;
  m.hamiltonian = [dim](const History&, double) { return Matrix::Zero(dim, dim); };
  m.propagator_fn = [b, t0 = fam.t0](const History& f, double s, double t) -> Matrix {
    double t_branch = f.empty() ? t0 : f.back().t;
    Matrix w_t = b->w(f, t);
    if (s == t_branch) return w_t;
    return w_t * b->w(f, s).inverse();
  };
  out.model = std::move(m);
  return out;
}

}  // namespace

ReconstructedOperators reconstruct_sqrt_plus(const DensityFamily& fam,
                                             const ReconstructionSpec& spec) {
  auto b = std::make_shared<SqrtPlusBuilder>(fam, spec);
  return package(b, fam);
}

ReconstructedOperators reconstruct_heisenberg_plus(const DensityFamily& fam,
                                                   const ReconstructionSpec& spec) {
  auto b = std::make_shared<HeisenbergPlusBuilder>(fam, spec);
  return package(b, fam);
}

}  // namespace flashpoint
