#include "flashpoint/povm.hpp"

#include <map>
#include <tuple>

#include "flashpoint/engine.hpp"
#include "flashpoint/opcore.hpp"

namespace flashpoint {

HistoryDensity density_from_model(const GrwfModel& model, int n, double t0) {
  HistoryDensity d;
  d.n = n;
  d.space = model.space;
  d.t0 = t0;
  const GrwfModel m = model;
  d.eval = [m, t0, n](const History& f) -> Matrix {
    if (static_cast<int>(f.size()) != n)
      throw std::invalid_argument("HistoryDensity: history length != n");
    Matrix l = ln_chain(m, f, t0);
    return l.adjoint() * l;
  };
  d.stop_term = [m, t0, n](const History& f) -> Matrix {
    if (static_cast<int>(f.size()) != n)
      throw std::invalid_argument("HistoryDensity: history length != n");
    Matrix l = ln_chain(m, f, t0);
    Matrix t_inf = lim_wstar_w(m, f, last_flash_time(f, t0));
    return l.adjoint() * t_inf * l;
  };
  return d;
}

namespace {

// Finite window + closed-form tail for sandwich time integrals. For an
// autonomous branch the tail integral_{T}^{inf} W* M W dt equals
// W(T)* X W(T) with R* X + X R = -M; otherwise panels are extended until the
// contributions decay geometrically below tolerance.
Matrix quad_time_integral(const BranchEvolver& ev, double s,
                          const std::function<Matrix(double)>& m_of_t,
                          const QuadratureSpec& quad) {
  const int dim = ev.model().hilbert_dim;
  const double span = quad.horizon_scale() / ev.rate_scale();
  Matrix acc = integrate_sandwich(ev, s, s, s + span, m_of_t, quad.nodes(), quad.panels());
  if (ev.autonomous()) {
    Matrix x;
    if (solve_lyapunov_gram(ev.generator(s), m_of_t(s + span), x)) {
      Matrix w_end = ev.w(s, s + span);
      return acc + w_end.adjoint() * x * w_end;
    }
  }
  // Geometric tail extension.
  double a = s + span;
  const double width = span / quad.panels();
  double prev = -1.0;
  for (int p = 0; p < 2000; ++p) {
    Matrix panel = integrate_sandwich(ev, s, a, a + width, m_of_t, quad.nodes(), 1);
    acc += panel;
    double contrib = panel.cwiseAbs().maxCoeff();
    if (prev > 0.0 && contrib < prev) {
      double rho = contrib / prev;
      if (contrib * rho / (1.0 - rho) < 1e-10) return acc;
    } else if (contrib < 1e-13) {
      return acc;
    }
    prev = contrib;
    a += width;
  }
  throw NonConvergence("quad_time_integral: tail did not decay");
}

struct CellKey {
  std::vector<std::pair<int, int>> cells;  // (q, label) sequence
  int level;
  bool operator<(const CellKey& o) const { return std::tie(cells, level) < std::tie(o.cells, o.level); }
};

// Phi_j(f, t_j) = T_inf(f) + integral dt sum_z W* C* Phi_{j+1}(f+z) C W dq,
// with Phi_n = I; Phi_0(empty, t0) is the POVM total mass of histories
// resolved up to depth n.
class NormalizationSweep {
 public:
  NormalizationSweep(const GrwfModel& model, int n, const QuadratureSpec& quad)
      : model_(model), n_(n), quad_(quad) {}

  Matrix phi(const History& f, double t_j, int j) {
    const int dim = model_.hilbert_dim;
    if (j == n_) return Matrix::Identity(dim, dim);
    const bool cacheable = model_.autonomous;
    CellKey key;
    if (cacheable) {
      for (const auto& z : f) key.cells.emplace_back(z.q, z.label);
      key.level = j;
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    Matrix acc = lim_wstar_w(model_, f, t_j, 1e-11);
    BranchEvolver ev(model_, f, t_j);
    auto m_of_t = [&](double t) -> Matrix {
      Matrix m = Matrix::Zero(dim, dim);
      for (int label = 0; label < model_.space.n_labels; ++label)
        for (int q = 0; q < model_.space.n_q(); ++q) {
          History fz = f;
          fz.push_back(FlashRecord::flash(q, t, label));
          Matrix next = phi(fz, t, j + 1);
          Matrix c = model_.collapse_at(f, q, t, label);
          m += model_.space.dq * (c.adjoint() * next * c);
        }
      return m;
    };
    acc += quad_time_integral(ev, t_j, m_of_t, quad_);
    if (cacheable) cache_.emplace(key, acc);
    return acc;
  }

 private:
  const GrwfModel& model_;
  int n_;
  QuadratureSpec quad_;
  std::map<CellKey, Matrix> cache_;
};

}  // namespace

NormalizationReport check_normalization(const GrwfModel& model, int n, double t0,
                                        const QuadratureSpec& quad) {
  NormalizationSweep sweep(model, n, quad);
  Matrix total = sweep.phi({}, t0, 0);
  NormalizationReport rep;
  rep.deviation =
      (total - Matrix::Identity(model.hilbert_dim, model.hilbert_dim)).cwiseAbs().maxCoeff();
  rep.quadrature_level = quad.level;
  return rep;
}

Matrix integrate_operator_to_infinity(const std::function<Matrix(double)>& g, double s,
                                      double panel_width, int nodes, double abs_tol) {
  Matrix acc;
  double a = s;
  double prev = -1.0;
  bool first = true;
  for (int p = 0; p < 4000; ++p) {
    Matrix panel;
    bool panel_first = true;
    for (auto [t, w] : gauss_legendre(nodes, a, a + panel_width)) {
      Matrix v = w * g(t);
      if (panel_first) {
        panel = v;
        panel_first = false;
      } else {
        panel += v;
      }
    }
    if (first) {
      acc = panel;
      first = false;
    } else {
      acc += panel;
    }
    double contrib = panel.cwiseAbs().maxCoeff();
    if (prev > 0.0 && contrib < prev) {
      double rho = contrib / prev;
      if (contrib * rho / (1.0 - rho) < abs_tol) return acc;
    } else if (contrib < abs_tol * 1e-3) {
      return acc;
    }
    prev = contrib;
    a += panel_width;
  }
  throw NonConvergence("integrate_operator_to_infinity: tail did not decay");
}

ConsistencyReport check_consistency(const HistoryDensity& d_np1, const HistoryDensity& d_n,
                                    const std::vector<History>& samples,
                                    const QuadratureSpec& quad) {
  if (d_np1.n != d_n.n + 1)
    throw std::invalid_argument("check_consistency: densities must be consecutive orders");
  ConsistencyReport rep;
  rep.histories = samples.size();
  for (const History& f : samples) {
    if (static_cast<int>(f.size()) != d_n.n)
      throw std::invalid_argument("check_consistency: sample length != n");
    double t_n = last_flash_time(f, d_n.t0);
    const ConfigSpace& space = d_np1.space;
    auto g = [&](double t) -> Matrix {
      Matrix m;
      bool first = true;
      for (int label = 0; label < space.n_labels; ++label)
        for (int q = 0; q < space.n_q(); ++q) {
          History fz = f;
          fz.push_back(FlashRecord::flash(q, t, label));
          Matrix v = space.dq * d_np1.eval(fz);
          if (first) {
            m = v;
            first = false;
          } else {
            m += v;
          }
        }
      return m;
    };
    // Panel width tuned to the density decay; nodes from the quadrature level.
    Matrix integral = integrate_operator_to_infinity(g, t_n, 1.0, quad.nodes(), 1e-11);
    Matrix target = d_n.eval(f);
    if (d_n.stop_term) target -= d_n.stop_term(f);
    double dev = (integral - target).cwiseAbs().maxCoeff();
    rep.max_deviation = std::max(rep.max_deviation, dev);
  }
  return rep;
}

std::vector<Matrix> experiment_povm(const GrwfModel& model, double t0, int dim_sys, int dim_env,
                                    const Vector& phi_env, const FirstFlashMap& zeta,
                                    const QuadratureSpec& quad) {
  if (dim_sys * dim_env != model.hilbert_dim)
    throw std::invalid_argument("experiment_povm: dim_sys * dim_env != hilbert_dim");
  if (std::abs(phi_env.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("experiment_povm: environment vector must be normalized");
  if (zeta.n_values < 1 || !zeta.value_of)
    throw std::invalid_argument("experiment_povm: malformed value map");

  const int dim = model.hilbert_dim;
  BranchEvolver ev(model, {}, t0);
  std::vector<Matrix> g_ops;
  g_ops.reserve(zeta.n_values);
  for (int v = 0; v < zeta.n_values; ++v) {
    auto m_of_t = [&](double t) -> Matrix {
      Matrix m = Matrix::Zero(dim, dim);
      for (int label = 0; label < model.space.n_labels; ++label)
        for (int q = 0; q < model.space.n_q(); ++q) {
          FlashRecord z = FlashRecord::flash(q, t, label);
          if (zeta.value_of(z) != v) continue;
          Matrix c = model.collapse_at({}, q, t, label);
          m += model.space.dq * (c.adjoint() * c);
        }
      return m;
    };
    Matrix g = quad_time_integral(ev, t0, m_of_t, quad);
    if (zeta.value_of(FlashRecord::cemetery_mark()) == v)
      g += lim_wstar_w(model, {}, t0);
    g_ops.push_back(std::move(g));
  }

  // Partial scalar product with phi: (L_phi y)_s = sum_e conj(phi_e) y_{s,e}.
  std::vector<Matrix> povm(zeta.n_values, Matrix::Zero(dim_sys, dim_sys));
  for (int v = 0; v < zeta.n_values; ++v) {
    for (int j = 0; j < dim_sys; ++j) {
      Vector psi_full = Vector::Zero(dim);
      for (int e = 0; e < dim_env; ++e) psi_full(j * dim_env + e) = phi_env(e);
      Vector y = g_ops[v] * psi_full;
      for (int s = 0; s < dim_sys; ++s) {
        Complex acc = 0.0;
        for (int e = 0; e < dim_env; ++e) acc += std::conj(phi_env(e)) * y(s * dim_env + e);
        povm[v](s, j) = acc;
      }
    }
    povm[v] = symmetrized(povm[v]);
  }
  return povm;
}

}  // namespace flashpoint
