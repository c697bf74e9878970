#include "flashpoint/gauge.hpp"

#include <map>
#include <tuple>

#include "flashpoint/opcore.hpp"
#include "flashpoint/propagator.hpp"

namespace flashpoint {

GaugeFamily identity_gauge(int dim) {
  GaugeFamily g;
  g.u = [dim](const History&, double) { return Matrix::Identity(dim, dim); };
  g.time_dependent = false;
  g.history_dependent = false;
  return g;
}

GaugeFamily constant_unitary_gauge(const Matrix& u, double t0) {
  if (unitary_deviation(u) > tol::unitary)
    throw std::invalid_argument("constant_unitary_gauge: non-unitary member");
  GaugeFamily g;
  Matrix uc = u;
  const int dim = static_cast<int>(u.rows());
  // Anchored at U_0^{t0} = I; families that fail this do not preserve the
  // history POVM with a fixed initial state.
  g.u = [uc, t0, dim](const History&, double t) -> Matrix {
    if (t > t0) return uc;
    return Matrix::Identity(dim, dim);
  };
  g.time_dependent = false;
  g.history_dependent = false;
  return g;
}

GaugeFamily heisenberg_gauge_constant_h(const Matrix& h, double t0) {
  GaugeFamily g;
  Matrix hc = h;
  g.u = [hc, t0](const History&, double t) { return matrix_exp(-kImag * hc, t - t0); };
  g.time_dependent = true;
  g.history_dependent = false;
  return g;
}

GaugeFamily compose_gauge(const GaugeFamily& g1, const GaugeFamily& g2) {
  GaugeFamily g;
  auto u1 = g1.u, u2 = g2.u;
  g.u = [u1, u2](const History& f, double t) -> Matrix { return u1(f, t) * u2(f, t); };
  g.time_dependent = g1.time_dependent || g2.time_dependent;
  g.history_dependent = g1.history_dependent || g2.history_dependent;
  return g;
}

GrwfModel apply_gauge(const GrwfModel& model, const GaugeFamily& g, double t0) {
  (void)t0;
  GrwfModel out;
  out.space = model.space;
  out.hilbert_dim = model.hilbert_dim;
  out.lambda_const = model.lambda_const;
  const bool hist = g.history_dependent || model.tier == Tier::PastDependent;
  out.tier = hist ? Tier::PastDependent : Tier::TimeDependent;
  auto u_of = g.u;
  const bool tdep = g.time_dependent;
  const GrwfModel base = model;  // value copy keeps the closure self-contained

  out.collapse_op = [base, u_of](const History& f, int q, double t, int label) -> Matrix {
    Matrix u_f = u_of(f, t);
    if (unitary_deviation(u_f) > tol::unitary)
      throw std::invalid_argument("apply_gauge: non-unitary gauge member");
    History fz = f;
    fz.push_back(FlashRecord::flash(q, t, label));
    Matrix u_fz = u_of(fz, t);
    return u_fz.adjoint() * base.collapse_at(f, q, t, label) * u_f;
  };
  out.hamiltonian = [base, u_of, tdep](const History& f, double t) -> Matrix {
    Matrix u = u_of(f, t);
    Matrix h = u.adjoint() * base.ham_at(f, t) * u;
    if (tdep) {
      const double eps = 1e-5;
      Matrix du_adj = (u_of(f, t + eps).adjoint() - u_of(f, t - eps).adjoint()) / (2.0 * eps);
      h += kImag * du_adj * u;
    }
    return symmetrized(h);
  };
  out.autonomous = false;
  // The transformed propagator is carried exactly: W~_s^t(f) =
  // U_0^t(f)^* W_s^t(f) U_0^s(f). This also covers families with a jump at
  // the anchor time, where the derivative term in H~ is singular.
  out.propagator_fn = [base, u_of](const History& f, double s, double t) -> Matrix {
    Matrix w = dyson_propagator(base, f, s, t);
    return u_of(f, t).adjoint() * w * u_of(f, s);
  };
  return out;
}

namespace {

struct HistoryKey {
  std::vector<std::tuple<int, double, int>> items;
  bool operator<(const HistoryKey& o) const { return items < o.items; }
  static HistoryKey of(const History& f) {
    HistoryKey k;
    for (const auto& z : f)
      if (!z.cemetery) k.items.emplace_back(z.q, z.t, z.label);
    return k;
  }
};

// U_0^t(f) of the two "plus" families. At each flash the value jumps to the
// polar factor of C(f_{n-1}, z_n) U_0^{t_n}(f_{n-1}); between flashes it
// follows either the Hamiltonian flow (Heisenberg-plus) or the polar factor
// of W^t(f) (square-root-plus).
class PlusGauge {
 public:
  enum class Flow { Hamiltonian, PolarW };

  PlusGauge(const GrwfModel& model, double t0, Flow flow)
      : model_(model), t0_(t0), flow_(flow) {}

  Matrix u0(const History& f, double t) const {
    Matrix u_n = branch_start(f);
    return interflash(f, t) * u_n;
  }

  Matrix branch_start(const History& f) const {
    if (f.empty()) return Matrix::Identity(model_.hilbert_dim, model_.hilbert_dim);
    HistoryKey key = HistoryKey::of(f);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    History prev(f.begin(), f.end() - 1);
    const FlashRecord& z = f.back();
    Matrix u_prev = u0(prev, z.t);
    Matrix c = model_.collapse_at(prev, z.q, z.t, z.label);
    Matrix u = polar_unitary(c * u_prev);
    cache_.emplace(key, u);
    return u;
  }

  // The factor U_{t_n}^t(f) multiplying the branch-start value.
  Matrix interflash(const History& f, double t) const {
    double t_n = last_flash_time(f, t0_);
    if (t == t_n) return Matrix::Identity(model_.hilbert_dim, model_.hilbert_dim);
    if (flow_ == Flow::PolarW) {
      Matrix w = dyson_propagator(model_, f, t_n, t);
      return polar_unitary(w);
    }
    if (model_.autonomous)
      return matrix_exp(-kImag * model_.ham_at(f, t_n), t - t_n);
    // RK4 on dU/dt = -i H(f,t) U, re-unitarized at the end.
    const int steps = std::max(16, static_cast<int>(std::ceil(std::abs(t - t_n) / 0.01)));
    const double h = (t - t_n) / steps;
    Matrix u = Matrix::Identity(model_.hilbert_dim, model_.hilbert_dim);
    double tc = t_n;
    auto rhs = [&](double tt, const Matrix& m) -> Matrix {
      return -kImag * (model_.ham_at(f, tt) * m);
    };
    for (int k = 0; k < steps; ++k) {
      Matrix k1 = rhs(tc, u);
      Matrix k2 = rhs(tc + 0.5 * h, u + 0.5 * h * k1);
      Matrix k3 = rhs(tc + 0.5 * h, u + 0.5 * h * k2);
      Matrix k4 = rhs(tc + h, u + h * k3);
      u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      tc += h;
    }
    return polar_unitary(u);
  }

  const GrwfModel& model() const { return model_; }

 private:
  GrwfModel model_;
  double t0_;
  Flow flow_;
  mutable std::map<HistoryKey, Matrix> cache_;
};

Matrix plus_collapse(const PlusGauge& pg, const History& f, int q, double t, int label) {
  Matrix u_f = pg.u0(f, t);
  Matrix c = pg.model().collapse_at(f, q, t, label);
  // Exactly the positive polar factor of C U_0^t(f).
  return symmetrized(polar_unitary(c * u_f).adjoint() * c * u_f);
}

}  // namespace

GrwfModel heisenberg_plus_picture(const GrwfModel& model, double t0) {
  auto pg = std::make_shared<PlusGauge>(model, t0, PlusGauge::Flow::Hamiltonian);
  GrwfModel out;
  out.space = model.space;
  out.hilbert_dim = model.hilbert_dim;
  out.lambda_const = model.lambda_const;
  out.tier = Tier::PastDependent;
  out.autonomous = false;
  out.collapse_op = [pg](const History& f, int q, double t, int label) {
    return plus_collapse(*pg, f, q, t, label);
  };
  const int dim = model.hilbert_dim;
  out.hamiltonian = [dim](const History&, double) { return Matrix::Zero(dim, dim); };
  return out;
}

GrwfModel square_root_picture(const GrwfModel& model, double t0) {
  auto pg = std::make_shared<PlusGauge>(model, t0, PlusGauge::Flow::PolarW);
  const GrwfModel base = model;
  GrwfModel out;
  out.space = model.space;
  out.hilbert_dim = model.hilbert_dim;
  out.lambda_const = model.lambda_const;
  out.tier = Tier::PastDependent;
  out.autonomous = false;
  // W~^t(f) = U_0^{t_n}(f)* (W* W)^{1/2} U_0^{t_n}(f), manifestly positive.
  out.propagator_fn = [base, pg](const History& f, double s, double t) -> Matrix {
    Matrix w = dyson_propagator(base, f, s, t);
    Matrix u_n = pg->branch_start(f);
    return u_n.adjoint() * positive_sqrt(symmetrized(w.adjoint() * w)) * u_n;
  };
  out.collapse_op = [pg](const History& f, int q, double t, int label) {
    return plus_collapse(*pg, f, q, t, label);
  };
  const int dim = model.hilbert_dim;
  out.hamiltonian = [dim](const History&, double) { return Matrix::Zero(dim, dim); };
  return out;
}

}  // namespace flashpoint
