#pragma once

#include <vector>

#include "flashpoint/rng.hpp"
#include "flashpoint/rgrwf/dirac.hpp"

namespace flashpoint::rgrwf {

// Radial localization profile along spacelike distance within a hyperboloid.
struct Profile {
  enum class Kind { Gaussian, CompactBump };
  Kind kind = Kind::Gaussian;
  double width = 1.0;

  double operator()(double u) const;
  // integral_0^infty l(u) du; the 1+1 normalizer is 1/(2 * half_integral).
  double half_integral() const;
};

struct RgrwfModel {
  double lambda = 1.0;
  Profile profile;
  int n_labels = 1;
  DiracLatticeParams lattice;
  int n_shells = 256;
  double s_max = 8.0;       // timelike-distance truncation of the shell grid
  double s_min_frac = 1e-4; // first shell at s_max * s_min_frac (geometric grid)
  // Marches stop once the mass still to cross drops below this fraction;
  // shell norms that agree within plateau_tol are extrapolated outward.
  double march_mass_tol = 1e-8;
  double plateau_tol = 1e-5;
};

// Geometric shell grid on (0, s_max].
std::vector<double> shell_grid(const RgrwfModel& model);

// Hyperboloid through distance s from base, discretized on the lattice columns.
Hyperboloid surface_at(const DiracLattice& lat, const SpacetimePoint& base, double s);

// Row normalizers N(y_j) = 1 / sum_x dmu_x l(sdist(x, y_j)); the discrete
// renormalization makes integral_Sigma Lambda_Sigma(x) dmu(x) = lambda I exact.
std::vector<double> surface_normalizers(const Hyperboloid& surf, const Profile& ell);

// Multiplication weights of Lambda_Sigma(x) for a flash at grid column x_idx.
std::vector<double> lambda_sigma_weights(const Hyperboloid& surf, int x_idx, double lambda,
                                         const Profile& ell,
                                         const std::vector<double>& normalizers);

// K_{x'}(x) applied to a state on a constant-t line, returned on the same
// line (marched up through the collapse surface and back). Includes the
// exp(-lambda tdist/2) damping; returns the zero state when x is outside the
// causal future of x'.
SliceState apply_k_operator(const RgrwfModel& model, const DiracLattice& lat,
                            const SliceState& psi, const SpacetimePoint& x_prime,
                            const SpacetimePoint& x);

struct KkReport {
  double value = 0.0;       // truncated integral of <psi| K* K |psi>
  double target = 0.0;      // 1 - exp(-lambda s_max)
  double deviation = 0.0;
  double max_edge_mass = 0.0;
};

// Coarea check: integral over J+(x') of the K Gram form against the closed
// form, truncated at s_max.
KkReport check_kk_normalization(const RgrwfModel& model, const SpacetimePoint& x_prime,
                                const SliceState& psi, double s_max, int n_shells);

struct RgrwfFlash {
  int label = 0;
  int k = 0;
  SpacetimePoint x;
  double tau_from_prev = 0.0;
};

struct RgrwfDiagnostics {
  double max_edge_mass = 0.0;
  double truncated_s_mass = 0.0;  // probability mass beyond s_max per draw, worst case
};

struct RgrwfResult {
  std::vector<std::vector<RgrwfFlash>> per_label;
  RgrwfDiagnostics diag;
};

// Sequential sampler, label round-robin. Product mode: one packet per label.
RgrwfResult sample_rgrwf(const RgrwfModel& model, const std::vector<SpacetimePoint>& seeds,
                         const std::vector<SliceState>& initial_factors, int n_per_label,
                         Rng& rng);

// Tensor mode: explicit product-space state (row-major over label factors,
// each factor of dimension 2*n_x), total dimension capped at 2^14.
RgrwfResult sample_rgrwf_tensor(const RgrwfModel& model, const std::vector<SpacetimePoint>& seeds,
                                const Vector& tensor_state, double t0, int n_per_label, Rng& rng);

}  // namespace flashpoint::rgrwf
