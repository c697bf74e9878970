#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "flashpoint/model.hpp"

namespace flashpoint {

// Gauss-Legendre nodes and weights on [a, b].
std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b);

// Between-flash propagator W_s^t(f) with generator R_t = -1/2 Lambda(Q,t) - i H(f,t).
// Constant generators go through the matrix exponential; genuinely
// time-dependent ones through the Dyson series, truncated when the norm bound
// (integral ||R||)^n / n! of the next term drops below tol. W = 0 for t < s.
Matrix dyson_propagator(const GrwfModel& model, const History& f, double s, double t,
                        double tol = 1e-10);

// Evolution driver for one fixed history branch; caches the generator.
class BranchEvolver {
 public:
  BranchEvolver(const GrwfModel& model, History f, double branch_time);

  // W_{from}^{to}(f), with branch-relative times (from, to >= branch_time).
  Matrix w(double from, double to, double tol = 1e-10) const;

  Matrix generator(double t) const;
  bool autonomous() const { return autonomous_ && !direct_w_; }
  bool direct() const { return static_cast<bool>(direct_w_); }
  double rate_scale() const { return rate_scale_; }
  double branch_time() const { return t_branch_; }
  const History& history() const { return f_; }
  const GrwfModel& model() const { return *model_; }

  // One uniform step of size h used by grid marches; cached when autonomous.
  const Matrix& uniform_step(double h) const;

 private:
  const GrwfModel* model_;
  History f_;
  double t_branch_;
  bool autonomous_;
  Matrix r_const_;  // generator when autonomous
  std::function<Matrix(const History&, double, double)> direct_w_;
  double rate_scale_;
  mutable Matrix step_cache_;
  mutable double step_cache_h_ = -1.0;
};

// lim_{t->inf} W^t(f)* W^t(f), the probability operator for "no further flash".
// Solved in closed form (Lyapunov equation) for constant generators when the
// system is nonsingular; otherwise marched to a convergence horizon where
// successive values differ by less than conv_tol.
Matrix lim_wstar_w(const GrwfModel& model, const History& f, double s,
                   double conv_tol = tol::stop_converge);

// integral_s^inf W_s^t* M(t) W_s^t dt. Exact Lyapunov route for constant
// generator and constant M; Gauss-Legendre panels with adaptive horizon
// otherwise.
Matrix integrate_sandwich_to_infinity(const BranchEvolver& ev, double s,
                                      const std::function<Matrix(double)>& m_of_t,
                                      double abs_tol = 1e-9, int nodes_per_panel = 12);

// integral_a^b W_s^t* M(t) W_s^t dt by Gauss-Legendre panels.
Matrix integrate_sandwich(const BranchEvolver& ev, double s, double a, double b,
                          const std::function<Matrix(double)>& m_of_t, int nodes_per_panel,
                          int panels);

// Solve R* X + X R = -M for X (the Gram integral of the semigroup).
// Returns false when the Kronecker system is too ill-conditioned to trust.
bool solve_lyapunov_gram(const Matrix& r, const Matrix& m, Matrix& x_out);

}  // namespace flashpoint
