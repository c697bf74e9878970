#pragma once

#include "flashpoint/propagator.hpp"

namespace flashpoint {

// Quadrature levels for the verification sweeps: Gauss-Legendre node count
// and panel count over the finite window, with the exponential tail handled
// by the constant-generator closed form where available.
struct QuadratureSpec {
  int level = 3;  // 1..3

  int nodes() const { return level <= 1 ? 2 : (level == 2 ? 3 : 6); }
  int panels() const { return level <= 1 ? 1 : 2; }
  double horizon_scale() const { return level <= 1 ? 2.0 : (level == 2 ? 3.0 : 4.0); }
};

// Operator-valued density of the n-flash marginal: E_n(f) = L_n(f)* L_n(f),
// plus the stopping term L_n(f)* (lim W*W) L_n(f) needed by consistency
// checks on variable-rate tiers.
struct HistoryDensity {
  int n = 0;
  ConfigSpace space;
  double t0 = 0.0;
  std::function<Matrix(const History&)> eval;
  std::function<Matrix(const History&)> stop_term;  // null means zero
};

HistoryDensity density_from_model(const GrwfModel& model, int n, double t0);

struct NormalizationReport {
  double deviation = 0.0;  // || sum - I ||_max
  int quadrature_level = 0;
};

// Sum over k < n of the integrated cemetery terms plus the integrated
// E_n term, compared against the identity.
NormalizationReport check_normalization(const GrwfModel& model, int n, double t0,
                                        const QuadratureSpec& quad);

struct ConsistencyReport {
  double max_deviation = 0.0;
  size_t histories = 0;
};

// max over the sampled histories f of
// || integral E_{n+1}(f, dz) - (E_n(f) - stop_term(f)) ||_max.
ConsistencyReport check_consistency(const HistoryDensity& d_np1, const HistoryDensity& d_n,
                                    const std::vector<History>& samples,
                                    const QuadratureSpec& quad);

// Value read off the first flash (or the cemetery) of a history.
struct FirstFlashMap {
  int n_values = 0;
  std::function<int(const FlashRecord&)> value_of;
};

// Experiment POVM on the system factor: E(v) = L_phi G(zeta^-1(v)) (. x phi),
// for a model on H_sys (x) H_env and a normalized environment vector phi.
std::vector<Matrix> experiment_povm(const GrwfModel& model, double t0, int dim_sys, int dim_env,
                                    const Vector& phi_env, const FirstFlashMap& zeta,
                                    const QuadratureSpec& quad);

// integral_s^inf of an operator-valued function by GL panels with geometric
// tail termination; the generic fallback used on black-box densities.
Matrix integrate_operator_to_infinity(const std::function<Matrix(double)>& g, double s,
                                      double panel_width, int nodes, double abs_tol);

}  // namespace flashpoint
