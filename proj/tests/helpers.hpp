#pragma once

#include "flashpoint/engine.hpp"
#include "flashpoint/model.hpp"

namespace flashpoint::testing {

inline double maxdev(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Random strictly time-ordered history of length n on the model's space.
inline History random_history(const ConfigSpace& space, int n, double t0, Rng& rng,
                              double mean_gap = 0.7) {
  History f;
  double t = t0;
  for (int k = 0; k < n; ++k) {
    t += rng.exponential(1.0 / mean_gap);
    int q = static_cast<int>(rng.uniform() * space.n_q());
    int label = static_cast<int>(rng.uniform() * space.n_labels);
    f.push_back(FlashRecord::flash(std::min(q, space.n_q() - 1), t,
                                   std::min(label, space.n_labels - 1)));
  }
  return f;
}

inline Matrix density_of(const GrwfModel& m, const History& f, double t0) {
  Matrix l = ln_chain(m, f, t0);
  return l.adjoint() * l;
}

}  // namespace flashpoint::testing
