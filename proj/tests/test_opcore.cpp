#include "doctest.h"
#include "flashpoint/opcore.hpp"
#include "flashpoint/model.hpp"
#include "flashpoint/rng.hpp"

using namespace flashpoint;

namespace {
double maxdev(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }
}

TEST_CASE("weak_integral: zero family sums to zero") {
  WeightedFamily fam;
  for (int i = 0; i < 4; ++i) {
    fam.members.emplace_back(Matrix::Zero(3, 3), OpTag::Positive);
    fam.weights.push_back(0.5 * (i + 1));
  }
  OperatorMatrix t = weak_integral(fam);
  CHECK(t.mat.cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.tag == OpTag::Positive);
}

TEST_CASE("weak_integral: random positive members match the entry-sum oracle") {
  Rng rng(42);
  WeightedFamily fam;
  for (int i = 0; i < 3; ++i) {
    fam.members.emplace_back(random_positive(2, rng), OpTag::Positive);
    fam.weights.push_back(1.0);
  }
  OperatorMatrix t = weak_integral(fam);
  // Independent per-entry summation.
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      Complex acc = 0.0;
      for (int i = 0; i < 3; ++i) acc += fam.members[i].mat(r, c);
      CHECK(std::abs(t.mat(r, c) - acc) < 1e-14);
    }
}

TEST_CASE("weak_integral: linear in weights and operators") {
  Rng rng(7);
  std::vector<Matrix> ops;
  std::vector<double> w1{0.3, 1.7, 0.0, 2.2}, w2{1.1, 0.2, 0.9, 0.4};
  for (int i = 0; i < 4; ++i) ops.push_back(random_positive(3, rng));
  auto integral = [&](const std::vector<double>& w) {
    WeightedFamily fam;
    for (int i = 0; i < 4; ++i) {
      fam.members.emplace_back(ops[i], OpTag::Positive);
      fam.weights.push_back(w[i]);
    }
    return weak_integral(fam).mat;
  };
  std::vector<double> wsum(4);
  for (int i = 0; i < 4; ++i) wsum[i] = w1[i] + 2.0 * w2[i];
  CHECK(maxdev(integral(wsum), integral(w1) + 2.0 * integral(w2)) < 1e-13);
}

TEST_CASE("weak_integral: dimension mismatch is an error") {
  WeightedFamily fam;
  fam.members.emplace_back(Matrix::Identity(2, 2));
  fam.members.emplace_back(Matrix::Identity(3, 3));
  fam.weights = {1.0, 1.0};
  CHECK_THROWS_AS(weak_integral(fam), std::invalid_argument);
}

TEST_CASE("positive_sqrt: identity and diagonal cases") {
  CHECK(maxdev(positive_sqrt(Matrix::Identity(3, 3)), Matrix::Identity(3, 3)) < 1e-14);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  Matrix r = positive_sqrt(d);
  CHECK(std::abs(r(0, 0).real() - 2.0) < 1e-14);
  CHECK(std::abs(r(1, 1).real() - 3.0) < 1e-14);
  CHECK(std::abs(r(0, 1)) < 1e-14);
}

TEST_CASE("positive_sqrt: construct-then-check on random B*B") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix b(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) b(i, j) = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);
    Matrix a = b.adjoint() * b;
    Matrix r = positive_sqrt(a);
    CHECK(maxdev(r * r, a) < 1e-10 * (1.0 + a.cwiseAbs().maxCoeff()));
    CHECK(herm_deviation(r) < 1e-12);
  }
}

TEST_CASE("positive_sqrt: idempotent-consistent") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix r = positive_sqrt(random_positive(3, rng));
    CHECK(maxdev(positive_sqrt(r * r), r) < 1e-9);
  }
}

TEST_CASE("positive_sqrt: rejects bad input") {
  Matrix nh(2, 2);
  nh << Complex(0, 0), Complex(1, 0), Complex(0, 0), Complex(0, 0);
  CHECK_THROWS_AS(positive_sqrt(nh), std::invalid_argument);
  Matrix neg = -0.5 * Matrix::Identity(2, 2);
  CHECK_THROWS_AS(positive_sqrt(neg), std::invalid_argument);
}

TEST_CASE("polar_unitary: unitary input is a fixed point") {
  Rng rng(5);
  Matrix u = random_unitary(3, rng);
  CHECK(maxdev(polar_unitary(u), u) < 1e-12);
}

TEST_CASE("polar_unitary: positive scaling maps to identity") {
  Matrix t = 2.0 * Matrix::Identity(4, 4);
  CHECK(maxdev(polar_unitary(t), Matrix::Identity(4, 4)) < 1e-13);
}

TEST_CASE("polar_unitary: U* t is positive for random invertible t") {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix t(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t(i, j) = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);
    t += 2.0 * Matrix::Identity(3, 3);  // keep it comfortably invertible
    Matrix u = polar_unitary(t);
    CHECK(unitary_deviation(u) < 1e-12);
    Matrix p = u.adjoint() * t;
    CHECK(herm_deviation(p) < 1e-9);
    CHECK(min_eigenvalue_hermitian(p) > -1e-9);
    CHECK(maxdev(u * positive_sqrt(t.adjoint() * t), t) < 1e-9);
  }
}

TEST_CASE("polar_unitary: singular input throws") {
  Matrix t = Matrix::Zero(2, 2);
  t(0, 0) = 1.0;
  CHECK_THROWS_AS(polar_unitary(t), SingularOperator);
}

TEST_CASE("matrix_exp: zero matrix and diagonal phases") {
  CHECK(maxdev(matrix_exp(Matrix::Zero(3, 3), 2.0), Matrix::Identity(3, 3)) < 1e-15);
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 1.3;
  h(1, 1) = -0.4;
  Matrix u = matrix_exp(-kImag * h, 1.0);
  CHECK(std::abs(u(0, 0) - std::polar(1.0, -1.3)) < 1e-14);
  CHECK(std::abs(u(1, 1) - std::polar(1.0, 0.4)) < 1e-14);
}

TEST_CASE("matrix_exp: agrees with the truncated Taylor oracle") {
  Rng rng(13);
  Matrix a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = Complex(rng.uniform() - 0.5, rng.uniform() - 0.5);
  const double s = 0.3;
  Matrix x = a * s;
  Matrix taylor = Matrix::Identity(4, 4);
  Matrix term = Matrix::Identity(4, 4);
  for (int k = 1; k <= 12; ++k) {
    term = term * x / double(k);
    taylor += term;
  }
  CHECK(maxdev(matrix_exp(a, s), taylor) < 1e-9);
}

TEST_CASE("matrix_exp: semigroup in s for a fixed generator") {
  Rng rng(17);
  Matrix a = random_hermitian(3, rng) * Complex(0, -1) - 0.3 * random_positive(3, rng);
  Matrix lhs = matrix_exp(a, 0.7 + 0.4);
  Matrix rhs = matrix_exp(a, 0.7) * matrix_exp(a, 0.4);
  CHECK(maxdev(lhs, rhs) < 1e-9);
}

TEST_CASE("OperatorMatrix tag checking") {
  OperatorMatrix ok(Matrix::Identity(2, 2), OpTag::Unitary);
  CHECK_NOTHROW(ok.check());
  Matrix skew(2, 2);
  skew << Complex(0, 0), Complex(1, 0), Complex(2, 0), Complex(0, 0);
  OperatorMatrix bad(skew, OpTag::Hermitian);
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  Matrix inf_m = Matrix::Identity(2, 2);
  inf_m(0, 0) = std::numeric_limits<double>::infinity();
  OperatorMatrix nf(inf_m, OpTag::General);
  CHECK_THROWS_AS(nf.check(), std::invalid_argument);
}
