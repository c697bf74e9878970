#include "flashpoint/propagator.hpp"

#include <cmath>

#include "flashpoint/opcore.hpp"

namespace flashpoint {

std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
  // Nodes by Newton iteration on P_n, standard symmetric construction.
  std::vector<std::pair<double, double>> out(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    out[i] = {mid - half * x, half * w};
    out[n - 1 - i] = {mid + half * x, half * w};
  }
  return out;
}

namespace {

Matrix generator_of(const GrwfModel& model, const History& f, double t) {
  Matrix lam = model.total_rate(f, t);
  Matrix h = model.ham_at(f, t);
  return -0.5 * lam - kImag * h;
}

// Dyson series on a uniform grid: iterated cumulative integrals of
// T_n(t) = int_s^t R(u) T_{n-1}(u) du, summed until the analytic term bound
// falls below tol. Returns W at the final node.
Matrix dyson_series_grid(const std::function<Matrix(double)>& r_of_t, int dim, double s, double t,
                         int intervals, double tol) {
  const int nodes = intervals + 1;
  const double h = (t - s) / intervals;
  std::vector<Matrix> r(nodes);
  double r_norm_integral = 0.0;
  for (int j = 0; j < nodes; ++j) {
    r[j] = r_of_t(s + j * h);
    r_norm_integral += r[j].cwiseAbs().rowwise().sum().maxCoeff() * (j == 0 || j == nodes - 1 ? 0.5 : 1.0);
  }
  r_norm_integral *= h;

  std::vector<Matrix> term(nodes, Matrix::Identity(dim, dim));
  std::vector<Matrix> sum(nodes, Matrix::Identity(dim, dim));
  double bound = 1.0;
  for (int n = 1; n <= 1000; ++n) {
    bound *= r_norm_integral / n;
    std::vector<Matrix> next(nodes);
    next[0] = Matrix::Zero(dim, dim);
    for (int j = 1; j < nodes; ++j)
      next[j] = next[j - 1] + 0.5 * h * (r[j - 1] * term[j - 1] + r[j] * term[j]);
    for (int j = 0; j < nodes; ++j) sum[j] += next[j];
    term.swap(next);
    if (bound < tol) return sum[nodes - 1];
  }
  throw NonConvergence("dyson series did not converge within 1000 terms");
}

}  // namespace

Matrix dyson_propagator(const GrwfModel& model, const History& f, double s, double t, double tol) {
  const int dim = model.hilbert_dim;
  if (t < s) return Matrix::Zero(dim, dim);
  if (t == s) return Matrix::Identity(dim, dim);
  if (model.propagator_fn) return model.propagator_fn(f, s, t);
  if (model.autonomous) {
    Matrix r = generator_of(model, f, s);
    return matrix_exp(r, t - s);
  }
  auto r_fn = [&](double u) { return generator_of(model, f, u); };
  int intervals = 32;
  Matrix prev = dyson_series_grid(r_fn, dim, s, t, intervals, tol);
  for (int refine = 0; refine < 8; ++refine) {
    intervals *= 2;
    Matrix cur = dyson_series_grid(r_fn, dim, s, t, intervals, tol);
    if ((cur - prev).cwiseAbs().maxCoeff() < std::max(tol, 1e-12)) return cur;
    prev = cur;
  }
  return prev;
}

BranchEvolver::BranchEvolver(const GrwfModel& model, History f, double branch_time)
    : model_(&model), f_(std::move(f)), t_branch_(branch_time) {
  autonomous_ = model.autonomous;
  direct_w_ = model.propagator_fn;
  if (autonomous_ && !direct_w_) {
    r_const_ = generator_of(model, f_, t_branch_);
    Matrix lam = model.total_rate(f_, t_branch_);
    rate_scale_ = std::max(1e-12, lam.cwiseAbs().rowwise().sum().maxCoeff());
  } else {
    Matrix lam = model.total_rate(f_, t_branch_);
    rate_scale_ = std::max(1e-12, lam.cwiseAbs().rowwise().sum().maxCoeff());
  }
}

Matrix BranchEvolver::generator(double t) const {
  if (autonomous_ && !direct_w_) return r_const_;
  return generator_of(*model_, f_, t);
}

Matrix BranchEvolver::w(double from, double to, double tol) const {
  const int dim = model_->hilbert_dim;
  if (to < from) return Matrix::Zero(dim, dim);
  if (to == from) return Matrix::Identity(dim, dim);
  if (direct_w_) {
    if (from == t_branch_) return direct_w_(f_, from, to);
    // Compose through the branch start: W_from^to = W(f)^to * (W(f)^from)^-1.
    Matrix wa = direct_w_(f_, t_branch_, from);
    Matrix wb = direct_w_(f_, t_branch_, to);
    return wb * wa.inverse();
  }
  if (autonomous_) return matrix_exp(r_const_, to - from);
  return dyson_propagator(*model_, f_, from, to, tol);
}

const Matrix& BranchEvolver::uniform_step(double h) const {
  if (step_cache_h_ != h) {
    if (!autonomous() ) throw std::logic_error("uniform_step requires an autonomous branch");
    step_cache_ = matrix_exp(r_const_, h);
    step_cache_h_ = h;
  }
  return step_cache_;
}

bool solve_lyapunov_gram(const Matrix& r, const Matrix& m, Matrix& x_out) {
  const Index d = r.rows();
  // vec(R* X + X R) = (I (x) R* + R^T (x) I) vec(X), column-major vec.
  Matrix k = Matrix::Zero(d * d, d * d);
  Matrix rs = r.adjoint();
  Matrix rt = r.transpose();
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index l = 0; l < d; ++l) {
        k(j * d + i, j * d + l) += rs(i, l);   // R* X term
        k(j * d + i, l * d + i) += rt(j, l);   // X R term
      }
  Eigen::VectorXcd rhs(d * d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) rhs(j * d + i) = -m(i, j);
  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible()) return false;
  Eigen::VectorXcd xv = lu.solve(rhs);
  Matrix x(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) x(i, j) = xv(j * d + i);
  double scale = 1.0 + m.cwiseAbs().maxCoeff() + r.cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff();
  double residual = (rs * x + x * r + m).cwiseAbs().maxCoeff();
  if (residual > 1e-9 * scale) return false;
  // The Gram integral is hermitian; a large skew part means a spurious solve.
  if (herm_deviation(x) > 1e-8 * (1.0 + x.cwiseAbs().maxCoeff())) return false;
  x_out = symmetrized(x);
  return true;
}

Matrix lim_wstar_w(const GrwfModel& model, const History& f, double s, double conv_tol) {
  const int dim = model.hilbert_dim;
  BranchEvolver ev(model, f, s);
  if (ev.autonomous()) {
    Matrix lam = model.total_rate(f, s);
    if (lam.cwiseAbs().maxCoeff() < 1e-14) return Matrix::Identity(dim, dim);
    Matrix x;
    if (solve_lyapunov_gram(ev.generator(s), lam, x)) {
      Matrix t_inf = Matrix::Identity(dim, dim) - x;
      // Clamp tiny negative noise; the limit operator is positive by theory.
      if (min_eigenvalue_hermitian(t_inf) > -1e-8) return t_inf;
    }
  }
  // Horizon march: T(t) = W*W evaluated on a doubling grid until successive
  // values differ by less than conv_tol.
  double h = 0.5 / ev.rate_scale();
  Matrix w = Matrix::Identity(dim, dim);
  Matrix t_prev = w;
  double t = s;
  const int hard_cap = 200000;
  for (int k = 0; k < hard_cap; ++k) {
    Matrix step = ev.autonomous() ? ev.uniform_step(h) : ev.w(t, t + h);
    w = step * w;
    t += h;
    Matrix t_cur = w.adjoint() * w;
    double diff = (t_cur - t_prev).cwiseAbs().maxCoeff();
    if (diff < conv_tol) return t_cur;
    t_prev = t_cur;
    if (k > 0 && k % 4096 == 0) h *= 2.0;  // stretch the horizon for slow decay
  }
  throw NonConvergence("lim W*W did not converge at the hard horizon cap");
}

Matrix integrate_sandwich(const BranchEvolver& ev, double s, double a, double b,
                          const std::function<Matrix(double)>& m_of_t, int nodes_per_panel,
                          int panels) {
  const int dim = ev.model().hilbert_dim;
  Matrix acc = Matrix::Zero(dim, dim);
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    auto nodes = gauss_legendre(nodes_per_panel, a + p * width, a + (p + 1) * width);
    for (auto [t, wgt] : nodes) {
      Matrix w = ev.w(s, t);
      acc += wgt * (w.adjoint() * m_of_t(t) * w);
    }
  }
  return acc;
}

Matrix integrate_sandwich_to_infinity(const BranchEvolver& ev, double s,
                                      const std::function<Matrix(double)>& m_of_t,
                                      double abs_tol, int nodes_per_panel) {
  const int dim = ev.model().hilbert_dim;
  if (ev.autonomous()) {
    Matrix m0 = m_of_t(s);
    bool m_const = true;
    Matrix m1 = m_of_t(s + 0.37 / ev.rate_scale());
    if ((m1 - m0).cwiseAbs().maxCoeff() > 1e-13 * (1.0 + m0.cwiseAbs().maxCoeff()))
      m_const = false;
    if (m_const) {
      Matrix x;
      if (solve_lyapunov_gram(ev.generator(s), m0, x)) return x;
    }
  }
  // Panel march with decaying contributions; stop when a panel falls below
  // the absolute tolerance and the running tail estimate is negligible.
  Matrix acc = Matrix::Zero(dim, dim);
  double width = 1.0 / ev.rate_scale();
  double a = s;
  double prev_contrib = -1.0;
  for (int p = 0; p < 4000; ++p) {
    Matrix panel = integrate_sandwich(ev, s, a, a + width, m_of_t, nodes_per_panel, 1);
    acc += panel;
    double contrib = panel.cwiseAbs().maxCoeff();
    if (contrib < abs_tol) {
      // Geometric tail estimate from the last two panels.
      if (prev_contrib > 0.0 && contrib < prev_contrib) {
        double rho = contrib / prev_contrib;
        if (contrib * rho / (1.0 - rho) < abs_tol) return acc;
      } else if (contrib < abs_tol * 1e-3) {
        return acc;
      }
    }
    prev_contrib = contrib;
    a += width;
  }
  throw NonConvergence("integrate_sandwich_to_infinity: horizon cap reached");
}

}  // namespace flashpoint
