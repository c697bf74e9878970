#pragma once

#include <functional>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "flashpoint/rgrwf/geometry.hpp"
#include "flashpoint/types.hpp"

namespace flashpoint::rgrwf {

// 1+1 Dirac lattice with gamma^0 = sigma_3, gamma^1 = i sigma_2, so that
// H = sigma_1 p + m sigma_3 + e A_0(x); p is the 4th-order central difference
// with periodic wrap. Crank-Nicolson steps are exactly unitary up to the
// linear-solver tolerance.
struct DiracLatticeParams {
  double mass = 1.0;
  double x_min = -10.0;
  double x_max = 10.0;
  int n_x = 400;
  double dt = 0.02;
  std::function<double(double)> a0;  // static potential; null means free
};

// State on a constant-t line: interleaved 2-spinors, size 2*n_x.
struct SliceState {
  double t = 0.0;
  Vector v;
};

class DiracLattice {
 public:
  explicit DiracLattice(DiracLatticeParams params);

  int n_x() const { return params_.n_x; }
  double dx() const { return dx_; }
  double dt() const { return params_.dt; }
  double x(int j) const { return params_.x_min + (j + 0.5) * dx_; }
  double mass() const { return params_.mass; }
  const DiracLatticeParams& params() const { return params_; }

  // Index of the lattice column nearest to coordinate xx.
  int column_of(double xx) const;

  // One Crank-Nicolson step; forward advances t by dt, backward by -dt.
  void step(SliceState& s, bool forward = true) const;

  // Same step applied to a block of columns (tensor-mode rest dimensions).
  void step_block(Eigen::MatrixXcd& v, bool forward = true) const;

  // L2 norm on the line: dx * sum |psi|^2.
  double slice_norm_sq(const SliceState& s) const;

  // Mass in the outer fraction of the box (truncation diagnostic).
  double edge_mass(const SliceState& s, double fraction = 0.05) const;

  // Gaussian wave packet, normalized, spinor (1, spin_mix)/sqrt(1+|mix|^2).
  SliceState gaussian_packet(double t0, double center, double width, double momentum,
                             Complex spin_mix = Complex(0, 0)) const;

 private:
  DiracLatticeParams params_;
  double dx_;
  Eigen::SparseMatrix<Complex> plus_, minus_;  // I +- i dt/2 H
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> plus_lu_, minus_lu_;
};

// Values of a state restricted to a hyperboloid, per lattice column.
struct SurfaceState {
  Hyperboloid surf;
  std::vector<Eigen::Vector2cd> values;  // values[j] at surface column j

  // sum over columns of weight * psi^dagger h psi with h = n^0 I - n^1 sigma_1.
  double norm_sq() const;
  double point_density(int j) const;  // psi^dagger h psi at column j (no weight)
};

// Evolve a slice to a hyperboloid by marching and per-column linear
// interpolation in t. The march stops once the not-yet-crossed columns carry
// less than pending_tol of squared norm. Backward marching is used when the
// surface starts below the slice.
SurfaceState restrict_to_surface(const DiracLattice& lat, SliceState psi, const Hyperboloid& surf,
                                 double pending_tol = 1e-12);

}  // namespace flashpoint::rgrwf
