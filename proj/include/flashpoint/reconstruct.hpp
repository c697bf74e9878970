#pragma once

#include "flashpoint/povm.hpp"

namespace flashpoint {

// Family of history densities E_n, evaluated through one callable whose
// history length selects the order; E_0(empty) = I is implied. The process is
// assumed not to stop (no cemetery), as in the rigorous reconstruction setup.
struct DensityFamily {
  ConfigSpace space;
  double t0 = 0.0;
  int n_max = 2;  // E_n available for #f <= n_max
  std::function<Matrix(const History&)> e;
  int dim = 0;
};

DensityFamily densities_from_model(const GrwfModel& model, double t0, int n_max);

struct ReconstructionSpec {
  double time_grid_step = 0.05;  // ODE grid; RK4 runs at a quarter of this
  int gl_nodes = 16;             // finite-part quadrature nodes per unit panel
  double bijective_floor = tol::recon_bijective;
};

// Reconstructed operator families, lazily evaluated and memoized per branch.
struct ReconstructedOperators {
  std::function<Matrix(const History& f, double t)> w;            // W^t(f)
  std::function<Matrix(const History& f, const FlashRecord& z)> c;
  std::function<Matrix(const History& f)> l;                      // L_{#f}(f)
  GrwfModel model;  // (C, W)-specified model usable with ln_chain
};

// Square-root-plus picture: positive W and C built from tail integrals of the
// densities, with the tails obtained as E_n minus the finite part.
ReconstructedOperators reconstruct_sqrt_plus(const DensityFamily& fam,
                                             const ReconstructionSpec& spec = {});

// Heisenberg-plus picture: H = 0 and W obtained by integrating
// dW/dt = -1/2 W^{-*} (L^{-*} [integral of E_{n+1} over cells] L^{-1}).
ReconstructedOperators reconstruct_heisenberg_plus(const DensityFamily& fam,
                                                   const ReconstructionSpec& spec = {});

}  // namespace flashpoint
