#pragma once

#include <cstdint>
#include <optional>

#include "flashpoint/propagator.hpp"
#include "flashpoint/rng.hpp"

namespace flashpoint {

// C psi / ||C psi||. Throws ZeroCollapseNorm when ||C psi|| <= 1e-14,
// which signals a flash sampled at a location of vanishing amplitude.
Vector collapse(const Vector& psi, const Matrix& c);

// L_n(f) = C(f_n) W^{t_n}(f_{n-1}) ... C(f_1) W^{t_1}(empty), L_0 = I.
// Returns the zero matrix when the flash times are not strictly increasing
// (the time-ordering indicator). Histories must not contain the cemetery.
Matrix ln_chain(const GrwfModel& model, const History& f, double t0);

// || W^t(f) psi ||^2, the probability of no flash in (t_n, t].
double survival(const GrwfModel& model, const History& f, double t0, const Vector& psi, double t);

// <psi | lim W*W | psi>, the probability that no further flash ever occurs.
double stop_probability(const GrwfModel& model, const History& f, double t0, const Vector& psi);

struct NextFlash {
  enum class Kind { Flash, Cemetery, BeyondCap };
  Kind kind = Kind::Flash;
  FlashRecord flash;
  Vector psi_after;  // normalized post-collapse state (Flash only)
};

// One step of the sequential construction: inverse-transform sample of the
// next flash time from the survival function, then the (q, label) cell from
// the rate quadratic form, then the collapse. A uniform draw below the
// stopping probability yields Cemetery. When t_cap is given and the sampled
// time would exceed it, BeyondCap is returned and no flash is consumed.
NextFlash sample_next_flash(const GrwfModel& model, const History& f, double t0,
                            const Vector& psi, Rng& rng,
                            std::optional<double> t_cap = std::nullopt);

struct StopRule {
  std::optional<int> max_flashes;
  std::optional<double> t_max;
};

struct Trajectory {
  uint64_t seed = 0;
  double t0 = 0.0;
  Vector psi0;
  History flashes;     // cemetery mark included when the process stopped
  Vector psi_final;    // state at t_max (or at the last decision point)
  double t_final = 0.0;
};

Trajectory simulate(const GrwfModel& model, const Vector& psi0, double t0, const StopRule& stop,
                    Rng& rng, uint64_t seed_for_record = 0);

// Deterministic batch: trajectory k uses the stream derived from
// (master_seed, k); results are ordered by index regardless of thread count.
// n_threads <= 0 reads FLASHPOINT_THREADS, falling back to the hardware count.
std::vector<Trajectory> run_batch(const GrwfModel& model, const Vector& psi0, double t0,
                                  const StopRule& stop, int n_trajectories, uint64_t master_seed,
                                  int n_threads = 0);

int resolve_thread_count(int requested);

}  // namespace flashpoint
