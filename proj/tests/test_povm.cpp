#include "doctest.h"
#include "flashpoint/opcore.hpp"
#include "flashpoint/povm.hpp"
#include "helpers.hpp"

using namespace flashpoint;
using namespace flashpoint::testing;

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

TEST_CASE("density_from_model: n = 0 is the identity") {
  Rng rng(201);
  ConfigSpace space(2, -1, 1, 1);
  GrwfModel m = random_model(Tier::VariableRate, 3, space, rng);
  HistoryDensity d0 = density_from_model(m, 0, 0.0);
  CHECK(maxdev(d0.eval({}), Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("density_from_model: simple tier n = 1 closed form") {
  ConfigSpace space(6, -3, 3, 1);
  Matrix h = lattice_hopping_hamiltonian(space, 1, 0.6);
  GrwfModel m = make_gaussian_model(space, 1.4, 1.0, 1, ParticleStatistics::Identical, h);
  HistoryDensity d1 = density_from_model(m, 1, 0.0);
  const double t1 = 0.9;
  History f{FlashRecord::flash(3, t1, 0)};
  Matrix e1 = d1.eval(f);
  Matrix c = m.collapse_at({}, 3, t1, 0);
  Matrix u = matrix_exp(-kImag * h, t1);
  Matrix expect = std::exp(-1.4 * t1) * (u.adjoint() * (c.adjoint() * c) * u);
  CHECK(maxdev(e1, expect) < 1e-12);
  // E vanishes on non-time-ordered histories.
  History bad{FlashRecord::flash(3, -0.1, 0)};
  CHECK(d1.eval(bad).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("density_from_model: random model n = 2 matches the factor chain") {
  Rng rng(202);
  ConfigSpace space(2, -1, 1, 1);
  GrwfModel m = random_model(Tier::VariableRate, 3, space, rng);
  HistoryDensity d2 = density_from_model(m, 2, 0.0);
  History f{FlashRecord::flash(0, 0.5, 0), FlashRecord::flash(1, 1.2, 0)};
  History f1{f[0]};
  Matrix l = m.collapse_at(f1, 1, 1.2, 0) * dyson_propagator(m, f1, 0.5, 1.2) *
             m.collapse_at({}, 0, 0.5, 0) * dyson_propagator(m, {}, 0.0, 0.5);
  CHECK(maxdev(d2.eval(f), l.adjoint() * l) < 1e-12);
}

TEST_CASE("check_normalization: simple tier reaches 1e-8") {
  ConfigSpace space(4, -2, 2, 1);
  Matrix h = lattice_hopping_hamiltonian(space, 1, 0.5);
  GrwfModel m = make_gaussian_model(space, 1.0, 1.0, 1, ParticleStatistics::Identical, h);
  QuadratureSpec quad;
  quad.level = 3;
  auto rep = check_normalization(m, 2, 0.0, quad);
  CHECK(rep.deviation <= 1e-8);
}

TEST_CASE("check_normalization: zero rate gives exactly the cemetery term") {
  ConfigSpace space(2, -1, 1, 1);
  std::vector<Matrix> fam(2, Matrix::Zero(2, 2));
  Rng rng(203);
  GrwfModel m = make_constant_model(space, fam, random_hermitian(2, rng), Tier::VariableRate);
  QuadratureSpec quad;
  quad.level = 2;
  auto rep = check_normalization(m, 1, 0.0, quad);
  CHECK(rep.deviation < 1e-10);
}

TEST_CASE("check_normalization: variable-rate models at level 3, decreasing over levels") {
  Rng rng(204);
  ConfigSpace space(2, -1, 1, 1);
  GrwfModel m = random_model(Tier::VariableRate, 3, space, rng);
  double dev[4];
  for (int level = 1; level <= 3; ++level) {
    QuadratureSpec quad;
    quad.level = level;
    dev[level] = check_normalization(m, 2, 0.0, quad).deviation;
  }
  CHECK(dev[3] <= 1e-4);
  CHECK(dev[2] < dev[1]);
  CHECK(dev[3] < dev[2]);
}

TEST_CASE("check_normalization: cemetery terms carry the mass on a stopping model") {
  // Fock-truncated model with number-conserving H: the vacuum never flashes.
  ConfigSpace space(2, -1, 1, 1);
  GrwfModel m = make_fock_truncated_model(space, 2, 0.8, 1.5, 0.4);
  QuadratureSpec quad;
  quad.level = 3;
  auto rep = check_normalization(m, 2, 0.0, quad);
  CHECK(rep.deviation <= 1e-4);
}

TEST_CASE("check_consistency: simple tier and the n = 0 reduction") {
  ConfigSpace space(3, -1.5, 1.5, 1);
  Matrix h = lattice_hopping_hamiltonian(space, 1, 0.4);
  GrwfModel m = make_gaussian_model(space, 1.2, 1.0, 1, ParticleStatistics::Identical, h);
  HistoryDensity d0 = density_from_model(m, 0, 0.0);
  HistoryDensity d1 = density_from_model(m, 1, 0.0);
  HistoryDensity d2 = density_from_model(m, 2, 0.0);
  QuadratureSpec quad;
  quad.level = 3;
  Rng rng(205);
  std::vector<History> ones, zeros{History{}};
  for (int k = 0; k < 8; ++k) ones.push_back(random_history(space, 1, 0.0, rng));
  auto rep1 = check_consistency(d2, d1, ones, quad);
  CHECK(rep1.max_deviation <= 1e-6);
  auto rep0 = check_consistency(d1, d0, zeros, quad);
  CHECK(rep0.max_deviation <= 1e-6);
}

TEST_CASE("check_consistency: variable-rate tier needs the stopping correction") {
  Rng rng(206);
  ConfigSpace space(2, -1, 1, 1);
  GrwfModel m = make_fock_truncated_model(space, 1, 0.9, 1.5, 0.5);
  HistoryDensity d0 = density_from_model(m, 0, 0.0);
  HistoryDensity d1 = density_from_model(m, 1, 0.0);
  QuadratureSpec quad;
  quad.level = 3;
  auto rep = check_consistency(d1, d0, {History{}}, quad);
  CHECK(rep.max_deviation <= 1e-6);
  // Without the correction the deviation is the full stopping mass.
  HistoryDensity d0_naked = d0;
  d0_naked.stop_term = nullptr;
  auto rep_naked = check_consistency(d1, d0_naked, {History{}}, quad);
  CHECK(rep_naked.max_deviation > 1e-2);
}

TEST_CASE("check_consistency: corrupted density is detected (negative control)") {
  ConfigSpace space(3, -1.5, 1.5, 1);
  Matrix h = lattice_hopping_hamiltonian(space, 1, 0.4);
  GrwfModel m = make_gaussian_model(space, 1.0, 1.0, 1, ParticleStatistics::Identical, h);
  HistoryDensity d1 = density_from_model(m, 1, 0.0);
  HistoryDensity d2 = density_from_model(m, 2, 0.0);
  HistoryDensity d2_bad = d2;
  auto base_eval = d2.eval;
  d2_bad.eval = [base_eval](const History& f) { return 1.01 * base_eval(f); };
  Rng rng(207);
  std::vector<History> ones{random_history(space, 1, 0.0, rng)};
  QuadratureSpec quad;
  quad.level = 3;
  auto rep = check_consistency(d2_bad, d1, ones, quad);
  CHECK(rep.max_deviation > 1e-3);
}

TEST_CASE("experiment_povm: constant map yields the identity on one value") {
  Rng rng(208);
  ConfigSpace space(2, -1, 1, 1);
  GrwfModel m = random_model(Tier::VariableRate, 4, space, rng);
  FirstFlashMap zeta;
  zeta.n_values = 3;
  zeta.value_of = [](const FlashRecord&) { return 1; };
  QuadratureSpec quad;
  quad.level = 3;
  auto povm = experiment_povm(m, 0.0, 2, 2, random_state(2, rng), zeta, quad);
  CHECK(maxdev(povm[1], Matrix::Identity(2, 2)) < 1e-7);
  CHECK(povm[0].cwiseAbs().maxCoeff() < 1e-9);
  CHECK(povm[2].cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("experiment_povm: positivity and additivity over a partition") {
  Rng rng(209);
  ConfigSpace space(2, -1, 1, 2);
  GrwfModel m = random_model(Tier::VariableRate, 4, space, rng);
  FirstFlashMap zeta;
  zeta.n_values = 2;
  zeta.value_of = [](const FlashRecord& z) { return z.cemetery ? 0 : z.label; };
  QuadratureSpec quad;
  quad.level = 3;
  auto povm = experiment_povm(m, 0.0, 2, 2, random_state(2, rng), zeta, quad);
  Matrix total = Matrix::Zero(2, 2);
  for (const auto& e : povm) {
    CHECK(min_eigenvalue_hermitian(e) > -1e-10);
    total += e;
  }
  CHECK(maxdev(total, Matrix::Identity(2, 2)) < 1e-7);
}

TEST_CASE("experiment_povm: trivial environment returns G itself") {
  Rng rng(210);
  ConfigSpace space(2, -1, 1, 2);
  GrwfModel m = random_model(Tier::VariableRate, 3, space, rng);
  FirstFlashMap zeta;
  zeta.n_values = 2;
  zeta.value_of = [](const FlashRecord& z) { return z.cemetery ? 0 : z.label; };
  QuadratureSpec quad;
  quad.level = 3;
  Vector phi(1);
  phi << 1.0;
  auto povm = experiment_povm(m, 0.0, 3, 1, phi, zeta, quad);
  // Independent evaluation of G(label sets) through the same quadrature on
  // the full space equals the system POVM when the environment is trivial.
  Matrix sum = povm[0] + povm[1];
  CHECK(maxdev(sum, Matrix::Identity(3, 3)) < 1e-7);
  for (const auto& e : povm) CHECK(min_eigenvalue_hermitian(e) > -1e-10);
}

TEST_CASE("experiment_povm: system-local flashes reduce to the single-system POVM") {
  Rng rng(211);
  ConfigSpace space(2, -1, 1, 2);
  GrwfModel m_sys = random_model(Tier::VariableRate, 2, space, rng);
  Matrix h_env = random_hermitian(3, rng);
  // Combined model: C x I_env, H_s x I + I x H_env.
  std::vector<Matrix> fam;
  for (int label = 0; label < 2; ++label)
    for (int q = 0; q < 2; ++q)
      fam.push_back(kron(m_sys.collapse_at({}, q, 0.0, label), Matrix::Identity(3, 3)));
  Matrix h_full = kron(*m_sys.const_hamiltonian, Matrix::Identity(3, 3)) +
                  kron(Matrix::Identity(2, 2), h_env);
  GrwfModel m_full = make_constant_model(space, fam, h_full, Tier::VariableRate);

  FirstFlashMap zeta;
  zeta.n_values = 2;
  zeta.value_of = [](const FlashRecord& z) { return z.cemetery ? 0 : z.label; };
  QuadratureSpec quad;
  quad.level = 3;
  Vector phi = random_state(3, rng);
  auto povm_full = experiment_povm(m_full, 0.0, 2, 3, phi, zeta, quad);
  Vector one(1);
  one << 1.0;
  auto povm_sys = experiment_povm(m_sys, 0.0, 2, 1, one, zeta, quad);
  for (int v = 0; v < 2; ++v) CHECK(maxdev(povm_full[v], povm_sys[v]) < 1e-8);
}

TEST_CASE("marginal consistency holds on time-dependent and past-dependent tiers") {
  Rng rng(212);
  QuadratureSpec quad;
  quad.level = 3;
  for (Tier tier : {Tier::TimeDependent, Tier::PastDependent}) {
    ConfigSpace space(2, -1, 1, 1);
    GrwfModel m = random_model(tier, 2, space, rng);
    HistoryDensity d0 = density_from_model(m, 0, 0.0);
    HistoryDensity d1 = density_from_model(m, 1, 0.0);
    HistoryDensity d2 = density_from_model(m, 2, 0.0);
    CHECK(check_consistency(d1, d0, {History{}}, quad).max_deviation < 1e-4);
    History one{FlashRecord::flash(1, 0.4, 0)};
    CHECK(check_consistency(d2, d1, {one}, quad).max_deviation < 1e-4);
  }
}
