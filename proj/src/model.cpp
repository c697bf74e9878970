#include "flashpoint/model.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "flashpoint/opcore.hpp"

namespace flashpoint {

Matrix GrwfModel::total_rate(const History& f, double t) const {
  if (const_total_rate) return *const_total_rate;
  Matrix sum = Matrix::Zero(hilbert_dim, hilbert_dim);
  for (int label = 0; label < space.n_labels; ++label)
    for (int q = 0; q < space.n_q(); ++q) {
      Matrix c = collapse_op(f, q, t, label);
      sum += space.dq * (c.adjoint() * c);
    }
  return sum;
}

bool GrwfModel::poisson_like() const {
  if (!lambda_const || !const_total_rate) return false;
  Matrix dev = *const_total_rate - *lambda_const * Matrix::Identity(hilbert_dim, hilbert_dim);
  return dev.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + *lambda_const);
}

void GrwfModel::validate() const {
  if (hilbert_dim < 1) throw std::invalid_argument("GrwfModel: hilbert_dim must be >= 1");
  if (!collapse_op) throw std::invalid_argument("GrwfModel: collapse_op missing");
  if ((tier == Tier::Simple || tier == Tier::Labeled)) {
    if (!lambda_const) throw std::invalid_argument("GrwfModel: Simple/Labeled tier needs lambda");
    History empty;
    Matrix tot = total_rate(empty, 0.0);
    Matrix dev = tot - *lambda_const * Matrix::Identity(hilbert_dim, hilbert_dim);
    if (dev.cwiseAbs().maxCoeff() > 1e-10 * (1.0 + *lambda_const))
      throw std::invalid_argument("GrwfModel: total rate is not lambda*I on Simple/Labeled tier");
  }
}

namespace {

// Multi-index over n_particles grid coordinates, row-major.
inline int grid_power_dim(int n_q, int n_particles) {
  int d = 1;
  for (int i = 0; i < n_particles; ++i) d *= n_q;
  return d;
}

inline int coord_of(int state, int particle, int n_q, int n_particles) {
  for (int i = n_particles - 1; i > particle; --i) state /= n_q;
  return state % n_q;
}

}  // namespace

std::vector<Matrix> gaussian_lambda_family(const ConfigSpace& space, double lambda, double sigma,
                                           int n_particles, ParticleStatistics statistics) {
  if (!(lambda > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("gaussian_lambda_family: lambda and sigma must be positive");
  if (sigma < space.dq)
    throw std::invalid_argument("gaussian_lambda_family: sigma below grid resolution dq");
  const int n_q = space.n_q();
  const int dim = grid_power_dim(n_q, n_particles);

  // kernel[r][q] = lambda * g(r - q) / Z(r) with per-row Z so that
  // sum_q kernel[r][q] * dq = lambda exactly.
  std::vector<std::vector<double>> kernel(n_q, std::vector<double>(n_q));
  for (int r = 0; r < n_q; ++r) {
    double z = 0.0;
    for (int q = 0; q < n_q; ++q) {
      double d = space.grid[r] - space.grid[q];
      kernel[r][q] = std::exp(-d * d / (2.0 * sigma * sigma));
      z += kernel[r][q] * space.dq;
    }
    for (int q = 0; q < n_q; ++q) kernel[r][q] *= lambda / z;
  }

  const int n_labels = statistics == ParticleStatistics::Distinguishable ? n_particles : 1;
  std::vector<Matrix> family(static_cast<size_t>(n_labels) * n_q);
  for (int label = 0; label < n_labels; ++label)
    for (int q = 0; q < n_q; ++q) {
      Matrix m = Matrix::Zero(dim, dim);
      for (int s = 0; s < dim; ++s) {
        double v = 0.0;
        if (statistics == ParticleStatistics::Distinguishable) {
          v = kernel[coord_of(s, label, n_q, n_particles)][q];
        } else {
          for (int p = 0; p < n_particles; ++p) v += kernel[coord_of(s, p, n_q, n_particles)][q];
        }
        m(s, s) = v;
      }
      family[static_cast<size_t>(label) * n_q + q] = std::move(m);
    }
  return family;
}

Matrix lattice_hopping_hamiltonian(const ConfigSpace& space, int n_particles, double hop) {
  const int n_q = space.n_q();
  const int dim = grid_power_dim(n_q, n_particles);
  Matrix h = Matrix::Zero(dim, dim);
  for (int s = 0; s < dim; ++s) {
    int stride = 1;
    for (int p = n_particles - 1; p >= 0; --p) {
      int c = coord_of(s, p, n_q, n_particles);
      if (c + 1 < n_q) {
        h(s, s + stride) += -hop;
        h(s + stride, s) += -hop;
      }
      stride *= n_q;
    }
  }
  return h;
}

static GrwfModel finish_constant_model(GrwfModel m, std::vector<Matrix> family,
                                       const Matrix& hamiltonian) {
  const int n_q = m.space.n_q();
  auto fam = std::make_shared<const std::vector<Matrix>>(std::move(family));
  m.collapse_op = [fam, n_q](const History&, int q, double, int label) -> Matrix {
    return (*fam)[static_cast<size_t>(label) * n_q + q];
  };
  Matrix h = hamiltonian;
  if (h.rows() == 0) h = Matrix::Zero(m.hilbert_dim, m.hilbert_dim);
  m.const_hamiltonian = h;
  m.hamiltonian = [h](const History&, double) { return h; };
  m.h_eig = std::make_shared<const Eigen::SelfAdjointEigenSolver<Matrix>>(symmetrized(h));

  Matrix tot = Matrix::Zero(m.hilbert_dim, m.hilbert_dim);
  for (const Matrix& c : *fam) tot += m.space.dq * (c.adjoint() * c);
  m.const_total_rate = tot;
  m.autonomous = true;
  return m;
}

GrwfModel make_gaussian_model(const ConfigSpace& space, double lambda, double sigma,
                              int n_particles, ParticleStatistics statistics,
                              const Matrix& hamiltonian) {
  auto lam = gaussian_lambda_family(space, lambda, sigma, n_particles, statistics);
  std::vector<Matrix> collapse(lam.size());
  for (size_t i = 0; i < lam.size(); ++i) {
    // Diagonal positive operators: the square root is entrywise.
    collapse[i] = lam[i].diagonal().cwiseSqrt().asDiagonal();
  }
  GrwfModel m;
  m.space = space;
  const int expected_labels =
      statistics == ParticleStatistics::Distinguishable ? n_particles : 1;
  if (space.n_labels != expected_labels)
    throw std::invalid_argument("make_gaussian_model: space.n_labels inconsistent with statistics");
  m.tier = expected_labels > 1 ? Tier::Labeled : Tier::Simple;
  m.hilbert_dim = static_cast<int>(lam.front().rows());
  m.lambda_const = n_particles * lambda;  // per-label lambda, summed over labels
  m = finish_constant_model(std::move(m), std::move(collapse), hamiltonian);
  m.validate();
  return m;
}

GrwfModel make_constant_model(const ConfigSpace& space, std::vector<Matrix> collapse_family,
                              const Matrix& hamiltonian, Tier tier) {
  if (collapse_family.size() != static_cast<size_t>(space.n_cells()))
    throw std::invalid_argument("make_constant_model: family size != n_cells");
  GrwfModel m;
  m.space = space;
  m.tier = tier;
  m.hilbert_dim = static_cast<int>(collapse_family.front().rows());
  m = finish_constant_model(std::move(m), std::move(collapse_family), hamiltonian);
  if (tier == Tier::Simple || tier == Tier::Labeled) {
    // Infer lambda from the (assumed scalar) total rate.
    m.lambda_const = m.const_total_rate->trace().real() / m.hilbert_dim;
    m.validate();
  }
  return m;
}

GrwfModel make_fock_truncated_model(const ConfigSpace& space, int n_max, double lambda,
                                    double sigma, double hopping, double pair_coupling) {
  if (space.n_labels != 1)
    throw std::invalid_argument("make_fock_truncated_model: single species only");
  const int n_q = space.n_q();
  // Occupation vectors with total <= n_max, enumerated lexicographically.
  std::vector<std::vector<int>> occ;
  std::vector<int> cur(n_q, 0);
  std::function<void(int, int)> enumerate = [&](int site, int remaining) {
    if (site == n_q) {
      occ.push_back(cur);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      cur[site] = k;
      enumerate(site + 1, remaining - k);
    }
    cur[site] = 0;
  };
  enumerate(0, n_max);
  const int dim = static_cast<int>(occ.size());

  std::map<std::vector<int>, int> index;
  for (int i = 0; i < dim; ++i) index[occ[i]] = i;

  // Renormalized smearing kernel rows, sum_q K[g][q] dq = 1.
  std::vector<std::vector<double>> kernel(n_q, std::vector<double>(n_q));
  for (int g = 0; g < n_q; ++g) {
    double z = 0.0;
    for (int q = 0; q < n_q; ++q) {
      double d = space.grid[g] - space.grid[q];
      kernel[g][q] = std::exp(-d * d / (2.0 * sigma * sigma));
      z += kernel[g][q] * space.dq;
    }
    for (int q = 0; q < n_q; ++q) kernel[g][q] /= z;
  }

  std::vector<Matrix> collapse(n_q);
  for (int q = 0; q < n_q; ++q) {
    Matrix m = Matrix::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) {
      double v = 0.0;
      for (int g = 0; g < n_q; ++g) v += lambda * kernel[g][q] * occ[s][g];
      m(s, s) = std::sqrt(v);
    }
    collapse[q] = std::move(m);
  }

  // Hopping conserves particle number; the optional pair term creates and
  // annihilates two quanta on the first site, linking number sectors.
  Matrix h = Matrix::Zero(dim, dim);
  auto amp = [](int n) { return std::sqrt(static_cast<double>(n)); };
  for (int s = 0; s < dim; ++s) {
    for (int g = 0; g + 1 < n_q; ++g) {
      if (occ[s][g] > 0) {
        std::vector<int> to = occ[s];
        to[g] -= 1;
        to[g + 1] += 1;
        auto it = index.find(to);
        if (it != index.end()) {
          double a = -hopping * amp(occ[s][g]) * amp(to[g + 1]);
          h(it->second, s) += a;
          h(s, it->second) += a;
        }
      }
    }
    if (pair_coupling != 0.0 && occ[s][0] + 2 <= n_max) {
      int total = 0;
      for (int g = 0; g < n_q; ++g) total += occ[s][g];
      if (total + 2 <= n_max) {
        std::vector<int> to = occ[s];
        to[0] += 2;
        auto it = index.find(to);
        if (it != index.end()) {
          double a = pair_coupling * amp(occ[s][0] + 1) * amp(occ[s][0] + 2);
          h(it->second, s) += a;
          h(s, it->second) += a;
        }
      }
    }
  }

  GrwfModel m;
  m.space = space;
  m.tier = Tier::VariableRate;
  m.hilbert_dim = dim;
  return finish_constant_model(std::move(m), std::move(collapse), h);
}

Matrix random_unitary(int dim, Rng& rng) {
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      // Box-Muller normals.
      double u1 = rng.uniform_pos(), u2 = rng.uniform();
      double r = std::sqrt(-2.0 * std::log(u1));
      a(i, j) = Complex(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
    }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i) {
    Complex d = r(i, i);
    q.col(i) *= d / std::abs(d);
  }
  return q;
}

Matrix random_hermitian(int dim, Rng& rng, double scale) {
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double u1 = rng.uniform_pos(), u2 = rng.uniform();
      double r = std::sqrt(-2.0 * std::log(u1));
      a(i, j) = Complex(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
    }
  return scale * 0.5 * (a + a.adjoint());
}

Matrix random_positive(int dim, Rng& rng, double scale) {
  Matrix b(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double u1 = rng.uniform_pos(), u2 = rng.uniform();
      double r = std::sqrt(-2.0 * std::log(u1));
      b(i, j) = Complex(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
    }
  return scale * (b.adjoint() * b) / dim;
}

Vector random_state(int dim, Rng& rng) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    double u1 = rng.uniform_pos(), u2 = rng.uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    v(i) = Complex(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
  }
  v.normalize();
  return v;
}

GrwfModel random_model(Tier tier, int dim, const ConfigSpace& space, Rng& rng,
                       const RandomModelOptions& opt) {
  const int cells = space.n_cells();
  std::vector<Matrix> base(cells);
  for (int i = 0; i < cells; ++i) base[i] = random_positive(dim, rng);

  Matrix h = random_hermitian(dim, rng);

  switch (tier) {
    case Tier::Simple:
    case Tier::Labeled: {
      // Exact renormalization: Lambda_z = lambda * T P_z T with T = S^{-1/2}.
      Matrix s = Matrix::Zero(dim, dim);
      for (const Matrix& p : base) s += space.dq * p;
      Matrix t = positive_sqrt(s).inverse();
      std::vector<Matrix> collapse(cells);
      for (int i = 0; i < cells; ++i) {
        Matrix lam = opt.lambda * (t * base[i] * t);
        collapse[i] = positive_sqrt(symmetrized(lam));
        if (!opt.positive_collapse) collapse[i] = random_unitary(dim, rng) * collapse[i];
      }
      GrwfModel m = make_constant_model(space, std::move(collapse), h, tier);
      m.lambda_const = opt.lambda;
      return m;
    }
    case Tier::VariableRate: {
      std::vector<Matrix> collapse(cells);
      // Rate floor keeps the no-flash survival integrable on every branch.
      Matrix floor_piece =
          std::sqrt(opt.rate_floor / (space.dq * cells)) * Matrix::Identity(dim, dim);
      for (int i = 0; i < cells; ++i) {
        Matrix c = positive_sqrt(base[i]) * 0.8 + floor_piece;
        if (!opt.positive_collapse) c = random_unitary(dim, rng) * c;
        collapse[i] = c;
      }
      return make_constant_model(space, std::move(collapse), h, tier);
    }
    case Tier::TimeDependent: {
      auto fixed = std::make_shared<std::vector<Matrix>>(cells);
      auto wobble = std::make_shared<std::vector<Matrix>>(cells);
      auto phases = std::make_shared<std::vector<double>>(cells);
      Matrix floor_piece =
          std::sqrt(opt.rate_floor / (space.dq * cells)) * Matrix::Identity(dim, dim);
      for (int i = 0; i < cells; ++i) {
        (*fixed)[i] = positive_sqrt(base[i]) * 0.8 + floor_piece;
        (*wobble)[i] = random_hermitian(dim, rng, opt.time_wobble);
        (*phases)[i] = 2 * M_PI * rng.uniform();
      }
      Matrix h1 = random_hermitian(dim, rng, 0.5);
      GrwfModel m;
      m.tier = tier;
      m.space = space;
      m.hilbert_dim = dim;
      const int n_q = space.n_q();
      m.collapse_op = [fixed, wobble, phases, n_q](const History&, int q, double t,
                                                   int label) -> Matrix {
        const size_t i = static_cast<size_t>(label) * n_q + q;
        return (*fixed)[i] + std::sin(t + (*phases)[i]) * (*wobble)[i];
      };
      m.hamiltonian = [h, h1](const History&, double t) -> Matrix {
        return h + std::cos(0.7 * t) * h1;
      };
      m.autonomous = false;
      return m;
    }
    case Tier::PastDependent: {
      // Collapse and Hamiltonian rotate by a unitary keyed to the last flash
      // cell; constant in t between flashes.
      std::vector<Matrix> collapse(cells);
      Matrix floor_piece =
          std::sqrt(opt.rate_floor / (space.dq * cells)) * Matrix::Identity(dim, dim);
      for (int i = 0; i < cells; ++i) {
        Matrix c = positive_sqrt(base[i]) * 0.8 + floor_piece;
        if (!opt.positive_collapse) c = random_unitary(dim, rng) * c;
        collapse[i] = c;
      }
      auto fam = std::make_shared<const std::vector<Matrix>>(std::move(collapse));
      auto rotors = std::make_shared<std::vector<Matrix>>();
      for (int i = 0; i < cells; ++i) rotors->push_back(random_unitary(dim, rng));
      const int n_q = space.n_q();
      auto branch_unitary = [rotors, n_q, dim](const History& f) -> Matrix {
        Matrix u = Matrix::Identity(dim, dim);
        for (const auto& z : f) {
          if (z.cemetery) continue;
          u = (*rotors)[static_cast<size_t>(z.label) * n_q + z.q] * u;
        }
        return u;
      };
      GrwfModel m;
      m.tier = tier;
      m.space = space;
      m.hilbert_dim = dim;
      m.collapse_op = [fam, branch_unitary, n_q](const History& f, int q, double,
                                                 int label) -> Matrix {
        Matrix u = branch_unitary(f);
        return u * (*fam)[static_cast<size_t>(label) * n_q + q] * u.adjoint();
      };
      m.hamiltonian = [h, branch_unitary](const History& f, double) -> Matrix {
        Matrix u = branch_unitary(f);
        return u * h * u.adjoint();
      };
      m.autonomous = true;  // constant between flashes for a fixed branch
      return m;
    }
  }
  throw std::logic_error("random_model: unknown tier");
}

}  // namespace flashpoint
