#pragma once

#include "flashpoint/model.hpp"

namespace flashpoint {

// Family of unitaries U_0^t(f) implementing a reparameterization of the
// defining operators. Two-time members follow from the composition law
// U_s^t = U_0^t (U_0^s)^{-1}; history densities are invariant for any family.
struct GaugeFamily {
  std::function<Matrix(const History& f, double t)> u;
  bool time_dependent = true;     // enables the derivative term in H-tilde
  bool history_dependent = true;  // transformed model keeps past dependence
};

GaugeFamily identity_gauge(int dim);
GaugeFamily constant_unitary_gauge(const Matrix& u, double t0 = 0.0);

// The Heisenberg choice dU_0^t/dt = -i H(f,t) U_0^t for a model with a
// constant Hamiltonian (U_0^t = exp(-i H t)).
GaugeFamily heisenberg_gauge_constant_h(const Matrix& h, double t0);

// Apply g1 then g2 as one family (pointwise product U1 U2).
GaugeFamily compose_gauge(const GaugeFamily& g1, const GaugeFamily& g2);

// Transformed model with
//   H~(f,t) = U_t^0 H U_0^t + i (dU_t^0/dt) U_0^t,
//   C~(f,z) = U_t^0(f+z) C(f,z) U_0^t(f);
// the derivative enters by central differences (step 1e-5) when the family
// is time dependent. Throws std::invalid_argument on a non-unitary member.
GrwfModel apply_gauge(const GrwfModel& model, const GaugeFamily& g, double t0);

// Gauge with H~ = 0 and every collapse operator positive: the unitary jump at
// each flash is the polar factor of C(f,z) U_0^t(f), and U evolves by
// dU/dt = -i H U between flashes. Requires bijective collapse operators.
GrwfModel heisenberg_plus_picture(const GrwfModel& model, double t0);

// Gauge with positive W^t(f) (and positive collapse operators on flashful
// branches): W~^t(f) = U* (W*W)^{1/2} U. The result specifies W directly.
GrwfModel square_root_picture(const GrwfModel& model, double t0);

}  // namespace flashpoint
