#include "flashpoint/opcore.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace flashpoint {

void OperatorMatrix::check() const {
  if (mat.rows() != mat.cols() || mat.rows() < 1)
    throw std::invalid_argument("OperatorMatrix: matrix must be square and nonempty");
  if (!entries_finite(mat))
    throw std::invalid_argument("OperatorMatrix: non-finite entries");
  switch (tag) {
    case OpTag::General:
      break;
    case OpTag::Hermitian:
      if (herm_deviation(mat) > tol::hermitian)
        throw std::invalid_argument("OperatorMatrix: hermitian tag violated");
      break;
    case OpTag::Positive: {
      if (herm_deviation(mat) > tol::hermitian)
        throw std::invalid_argument("OperatorMatrix: positive tag requires hermitian");
      if (min_eigenvalue_hermitian(mat) < -tol::positive)
        throw std::invalid_argument("OperatorMatrix: positive tag violated");
      break;
    }
    case OpTag::Unitary:
      if (unitary_deviation(mat) > tol::unitary)
        throw std::invalid_argument("OperatorMatrix: unitary tag violated");
      break;
  }
}

OperatorMatrix weak_integral(const WeightedFamily& family) {
  if (family.members.empty())
    throw std::invalid_argument("weak_integral: empty family");
  if (family.members.size() != family.weights.size())
    throw std::invalid_argument("weak_integral: weights/members length mismatch");
  const Index d = family.members.front().dim();
  Matrix sum = Matrix::Zero(d, d);
  bool all_positive = true;
  for (size_t i = 0; i < family.members.size(); ++i) {
    const OperatorMatrix& op = family.members[i];
    if (op.dim() != d)
      throw std::invalid_argument("weak_integral: dimension mismatch among members");
    const double w = family.weights[i];
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("weak_integral: weights must be finite and nonnegative");
    sum += w * op.mat;
    all_positive = all_positive && op.tag == OpTag::Positive;
  }
  return OperatorMatrix(std::move(sum), all_positive ? OpTag::Positive : OpTag::General);
}

double min_eigenvalue_hermitian(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double min_singular_value(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

bool is_bijective(const Matrix& a, double sv_cutoff) {
  return min_singular_value(a) > sv_cutoff;
}

Matrix positive_sqrt(const Matrix& a, double eig_floor) {
  if (herm_deviation(a) > 1e-9 * (1.0 + a.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("positive_sqrt: input not hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -eig_floor * (1.0 + ev.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("positive_sqrt: eigenvalue below tolerance floor");
    if (ev[i] < 0.0) ev[i] = 0.0;  // floating-point noise on a positive operator
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         es.eigenvectors().adjoint();
}

Matrix polar_unitary(const Matrix& t, double sv_cutoff) {
  Eigen::JacobiSVD<Matrix> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() <= sv_cutoff)
    throw SingularOperator("polar_unitary: operator not bijective at cutoff");
  return svd.matrixU() * svd.matrixV().adjoint();
}

Matrix matrix_exp(const Matrix& a, double s) {
  const Index d = a.rows();
  Matrix x = a * s;
  if (!entries_finite(x)) return Matrix::Constant(d, d, std::nan(""));
  const double norm = x.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    x *= std::pow(2.0, -squarings);
  }
  // Taylor to order 18; with ||x|| <= 1/2 the truncation is below 1e-17.
  Matrix result = Matrix::Identity(d, d);
  Matrix term = Matrix::Identity(d, d);
  for (int k = 1; k <= 18; ++k) {
    term = term * x / static_cast<double>(k);
    result += term;
  }
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

}  // namespace flashpoint
