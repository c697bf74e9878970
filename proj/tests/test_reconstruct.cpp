#include "doctest.h"
#include "flashpoint/gauge.hpp"
#include "flashpoint/opcore.hpp"
#include "flashpoint/reconstruct.hpp"
#include "helpers.hpp"

using namespace flashpoint;
using namespace flashpoint::testing;

namespace {

GrwfModel random_stable_model(Rng& rng, int dim, bool positive, int n_q = 2, int labels = 1) {
  ConfigSpace space(n_q, -1.0, 1.0, labels);
  RandomModelOptions opt;
  opt.positive_collapse = positive;
  opt.rate_floor = 0.5;  // keeps every density comfortably bijective
  return random_model(Tier::VariableRate, dim, space, rng, opt);
}

}  // namespace

TEST_CASE("sqrt-plus: scalar-rate model reproduces the exponential W") {
  // Lambda(Q) = lambda I with H = 0 and positive C: already square-root-plus.
  ConfigSpace space(2, -1, 1, 1);
  const double lambda = 1.1;
  std::vector<Matrix> fam(2);
  for (int q = 0; q < 2; ++q)
    fam[q] = std::sqrt(lambda / (2 * space.dq)) * Matrix::Identity(2, 2);
  GrwfModel m = make_constant_model(space, fam, Matrix::Zero(2, 2), Tier::Simple);
  auto rec = reconstruct_sqrt_plus(densities_from_model(m, 0.0, 2));
  for (double t : {0.3, 1.0, 2.0}) {
    Matrix expect = std::exp(-lambda * t / 2.0) * Matrix::Identity(2, 2);
    CHECK(maxdev(rec.w({}, t), expect) < 1e-8);
  }
  History f{FlashRecord::flash(0, 0.7, 0)};
  CHECK(maxdev(rec.c({}, f[0]), fam[0]) < 1e-8);
}

TEST_CASE("sqrt-plus: fixed point on a model already in square-root-plus form") {
  // Commuting positive collapse family, H = 0: C and W are recovered as-is.
  ConfigSpace space(2, -1, 1, 1);
  Matrix c0 = Matrix::Zero(2, 2), c1 = Matrix::Zero(2, 2);
  c0(0, 0) = 0.9;
  c0(1, 1) = 0.5;
  c1(0, 0) = 0.6;
  c1(1, 1) = 1.0;
  GrwfModel m = make_constant_model(space, {c0, c1}, Matrix::Zero(2, 2), Tier::VariableRate);
  auto rec = reconstruct_sqrt_plus(densities_from_model(m, 0.0, 2));
  for (double t : {0.4, 1.2}) {
    Matrix w_m = dyson_propagator(m, {}, 0.0, t);
    CHECK(maxdev(rec.w({}, t), w_m) < 1e-7);
  }
  FlashRecord z = FlashRecord::flash(1, 0.8, 0);
  CHECK(maxdev(rec.c({}, z), c1) < 1e-7);
  History f{z};
  CHECK(maxdev(rec.w(f, 1.5), dyson_propagator(m, f, 0.8, 1.5)) < 1e-6);
}

TEST_CASE("sqrt-plus: round trip E_n within 1e-7 and positive operators") {
  Rng rng(301);
  for (int rep = 0; rep < 4; ++rep) {
    int dim = 2 + rep % 3;
    GrwfModel m = random_stable_model(rng, dim, rep % 2 == 0);
    auto rec = reconstruct_sqrt_plus(densities_from_model(m, 0.0, 3));
    for (int n = 1; n <= 2; ++n) {
      History f = random_history(m.space, n, 0.0, rng, 0.3);
      Matrix e_orig = density_of(m, f, 0.0);
      Matrix e_rec = density_of(rec.model, f, 0.0);
      CHECK(maxdev(e_orig, e_rec) < 1e-7);
    }
    History f1 = random_history(m.space, 1, 0.0, rng, 0.3);
    Matrix w = rec.w(f1, f1.back().t + 0.9);
    CHECK(herm_deviation(w) < 1e-9);
    CHECK(min_eigenvalue_hermitian(w) > -1e-9);
    Matrix c = rec.c(f1, FlashRecord::flash(0, f1.back().t + 0.9, 0));
    CHECK(herm_deviation(c) < 1e-9);
    CHECK(min_eigenvalue_hermitian(c) > -1e-9);
  }
}

TEST_CASE("sqrt-plus: reconstruction gauge is unitary and maps the models onto each other") {
  Rng rng(302);
  GrwfModel m = random_stable_model(rng, 3, false);
  auto rec = reconstruct_sqrt_plus(densities_from_model(m, 0.0, 3));
  for (int n = 0; n <= 1; ++n) {
    History f = n == 0 ? History{} : random_history(m.space, 1, 0.0, rng, 0.3);
    double t_n = last_flash_time(f, 0.0);
    double t = t_n + 0.8;
    // U_0^t(f) = W_orig^t(f) L_orig L_rec^{-1} W_rec^t(f)^{-1} is unitary and
    // conjugates the original collapse operators into the reconstructed ones.
    Matrix l_orig = ln_chain(m, f, 0.0);
    Matrix l_rec = rec.l(f);
    Matrix u_n = n == 0 ? Matrix::Identity(3, 3)
                        : polar_unitary(l_orig * l_rec.inverse());
    Matrix u_t = dyson_propagator(m, f, t_n, t) * u_n * rec.w(f, t).inverse();
    u_t = polar_unitary(u_t);  // snap floating-point noise to the unitary group
    CHECK(unitary_deviation(u_t) < 1e-9);
    // C_rec(f, z) = U_0^t(f+z)^* C_orig(f, z) U_0^t(f).
    FlashRecord z = FlashRecord::flash(0, t, 0);
    History fz = f;
    fz.push_back(z);
    Matrix u_fz = polar_unitary(ln_chain(m, fz, 0.0) * rec.l(fz).inverse());
    Matrix mapped = u_fz.adjoint() * m.collapse_at(f, z.q, z.t, z.label) * u_t;
    CHECK(maxdev(mapped, rec.c(f, z)) < 1e-6);
  }
}

TEST_CASE("sqrt-plus: singular densities are reported with the offending history") {
  // A collapse family with a common kernel direction makes E_1 singular.
  ConfigSpace space(2, -1, 1, 1);
  Matrix c = Matrix::Zero(2, 2);
  c(1, 1) = 1.0;
  GrwfModel m = make_constant_model(space, {c, c}, Matrix::Zero(2, 2), Tier::VariableRate);
  auto rec = reconstruct_sqrt_plus(densities_from_model(m, 0.0, 2));
  CHECK_THROWS_AS(rec.c({}, FlashRecord::flash(0, 0.5, 0)), SingularDensity);
}

TEST_CASE("heisenberg-plus: scalar model gives W = exp(-lambda t / 2)") {
  ConfigSpace space(2, -1, 1, 1);
  const double lambda = 0.9;
  std::vector<Matrix> fam(2);
  for (int q = 0; q < 2; ++q)
    fam[q] = std::sqrt(lambda / (2 * space.dq)) * Matrix::Identity(2, 2);
  GrwfModel m = make_constant_model(space, fam, Matrix::Zero(2, 2), Tier::Simple);
  ReconstructionSpec spec;
  spec.time_grid_step = 0.02;
  auto rec = reconstruct_heisenberg_plus(densities_from_model(m, 0.0, 2), spec);
  for (double t : {0.5, 1.5}) {
    Matrix expect = std::exp(-lambda * t / 2.0) * Matrix::Identity(2, 2);
    CHECK(maxdev(rec.w({}, t), expect) < 1e-8);
  }
}

TEST_CASE("heisenberg-plus: round trip E_1, E_2 within 1e-6") {
  Rng rng(303);
  for (int rep = 0; rep < 3; ++rep) {
    GrwfModel m = random_stable_model(rng, 2 + rep, rep % 2 == 1);
    ReconstructionSpec spec;
    spec.time_grid_step = 0.05;
    auto rec = reconstruct_heisenberg_plus(densities_from_model(m, 0.0, 3), spec);
    for (int n = 1; n <= 2; ++n) {
      History f = random_history(m.space, n, 0.0, rng, 0.3);
      CHECK(maxdev(density_of(m, f, 0.0), density_of(rec.model, f, 0.0)) < 1e-6);
    }
  }
}

TEST_CASE("heisenberg-plus: commuting time-dependent rates match the exponential integral") {
  // Lambda(Q, t) = g(t) D with a fixed diagonal D and H = 0: the generators
  // commute, so W^t = exp(-1/2 D int_0^t g).
  ConfigSpace space(1, -0.5, 0.5, 1);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 0.8;
  d(1, 1) = 1.5;
  GrwfModel m;
  m.tier = Tier::TimeDependent;
  m.space = space;
  m.hilbert_dim = 2;
  m.autonomous = false;
  Matrix droot = d.cwiseSqrt();
  m.collapse_op = [droot](const History&, int, double t, int) -> Matrix {
    return std::sqrt(1.0 + 0.5 * std::sin(t)) * droot;
  };
  m.hamiltonian = [](const History&, double) { return Matrix::Zero(2, 2); };
  ReconstructionSpec spec;
  spec.time_grid_step = 0.02;
  auto rec = reconstruct_heisenberg_plus(densities_from_model(m, 0.0, 2), spec);
  const double t = 1.3;
  const double g_int = t + 0.5 * (1.0 - std::cos(t));  // int_0^t (1 + sin(s)/2)
  Matrix expect = matrix_exp(-0.5 * g_int * d, 1.0);
  CHECK(maxdev(rec.w({}, t), expect) < 1e-7);
}
