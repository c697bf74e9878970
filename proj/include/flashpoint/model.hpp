#pragma once

#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Eigenvalues>

#include "flashpoint/config_space.hpp"
#include "flashpoint/rng.hpp"
#include "flashpoint/types.hpp"

namespace flashpoint {

enum class Tier { Simple, Labeled, VariableRate, TimeDependent, PastDependent };

// Suggested values of the original model's constants, in SI units. Provided
// as a named preset only; all computations run in natural units.
namespace physical_grw {
inline constexpr double lambda_per_second = 1e-15;
inline constexpr double sigma_meters = 1e-7;
}  // namespace physical_grw

// One GRWf theory: collapse-operator family C(f, q, t, i) and Hamiltonian
// H(f, t) on a finite-dimensional Hilbert space over a ConfigSpace. For tiers
// below PastDependent the history argument is ignored by the callables; for
// tiers below TimeDependent the time argument is ignored as well.
struct GrwfModel {
  Tier tier = Tier::Simple;
  ConfigSpace space;
  int hilbert_dim = 0;

  std::function<Matrix(const History& f, int q, double t, int label)> collapse_op;
  std::function<Matrix(const History& f, double t)> hamiltonian;
  std::optional<double> lambda_const;  // total rate for Simple/Labeled tiers

  // Structure hints filled by builders; they only enable fast paths and never
  // change semantics.
  bool autonomous = true;  // generator independent of t for a fixed history
  std::optional<Matrix> const_total_rate;
  std::optional<Matrix> const_hamiltonian;
  std::shared_ptr<const Eigen::SelfAdjointEigenSolver<Matrix>> h_eig;

  // Optional direct specification of the between-flash propagator W_s^t(f)
  // (s is the time of the last flash in f). When set it overrides the Dyson
  // construction; used by gauge transforms and reconstruction outputs.
  std::function<Matrix(const History& f, double s, double t)> propagator_fn;

  Matrix collapse_at(const History& f, int q, double t, int label) const {
    return collapse_op(f, q, t, label);
  }
  Matrix ham_at(const History& f, double t) const {
    if (hamiltonian) return hamiltonian(f, t);
    return Matrix::Zero(hilbert_dim, hilbert_dim);
  }

  // Lambda(Q, t) = sum over cells and labels of C* C * dq.
  Matrix total_rate(const History& f, double t) const;

  // True when the total rate operator is a constant multiple of the identity,
  // i.e. flash times form a Poisson process.
  bool poisson_like() const;

  void validate() const;
};

enum class ParticleStatistics { Distinguishable, Identical };

// Flash-rate family of the original Gaussian model on a 1D grid, one diagonal
// positive operator per (cell, label), renormalized per grid row so that
// sum_q Lambda_i(q) dq = lambda * I holds exactly for every label.
// Layout of the returned family: index = label * n_q + q.
std::vector<Matrix> gaussian_lambda_family(const ConfigSpace& space, double lambda, double sigma,
                                           int n_particles, ParticleStatistics statistics);

GrwfModel make_gaussian_model(const ConfigSpace& space, double lambda, double sigma,
                              int n_particles, ParticleStatistics statistics,
                              const Matrix& hamiltonian);

// Model defined by explicit constant collapse operators C[label * n_q + q].
GrwfModel make_constant_model(const ConfigSpace& space, std::vector<Matrix> collapse_family,
                              const Matrix& hamiltonian, Tier tier = Tier::VariableRate);

// Single-species non-relativistic QFT example on a truncated bosonic Fock
// space over the grid, occupation capped at n_max: Lambda(q) is the smeared
// number density, so the total rate operator is lambda * N-hat.
GrwfModel make_fock_truncated_model(const ConfigSpace& space, int n_max, double lambda,
                                    double sigma, double hopping, double pair_coupling = 0.0);

// Free-particle-style lattice hopping Hamiltonian on n_q^n_particles.
Matrix lattice_hopping_hamiltonian(const ConfigSpace& space, int n_particles, double hop);

// Random model corpora for verification sweeps. Deterministic given the rng.
struct RandomModelOptions {
  double lambda = 1.0;       // Simple/Labeled normalization target
  double rate_floor = 0.25;  // added to Lambda(Q) spectrum for integrable tails
  double time_wobble = 0.4;  // amplitude of the t-dependence (TimeDependent)
  bool positive_collapse = true;
};

GrwfModel random_model(Tier tier, int dim, const ConfigSpace& space, Rng& rng,
                       const RandomModelOptions& opt = {});

Matrix random_unitary(int dim, Rng& rng);
Matrix random_hermitian(int dim, Rng& rng, double scale = 1.0);
Matrix random_positive(int dim, Rng& rng, double scale = 1.0);
Vector random_state(int dim, Rng& rng);

}  // namespace flashpoint
