#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flashpoint {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr Complex kImag{0.0, 1.0};

// Project-wide tolerance conventions.
namespace tol {
inline constexpr double hermitian = 1e-12;      // max |A - A*| entry
inline constexpr double positive = 1e-10;       // min eigenvalue floor
inline constexpr double unitary = 1e-10;        // max |A*A - I| entry
inline constexpr double bijective = 1e-10;      // singular value cutoff
inline constexpr double recon_bijective = 1e-8; // looser cutoff inside reconstruction
inline constexpr double collapse_norm = 1e-14;  // ||C psi|| below this is an error
inline constexpr double state_norm = 1e-12;     // normalized state slack
inline constexpr double stop_converge = 1e-8;   // successive-difference for lim W*W
}  // namespace tol

struct ZeroCollapseNorm : std::runtime_error {
  explicit ZeroCollapseNorm(const std::string& what) : std::runtime_error(what) {}
};

struct SingularOperator : std::runtime_error {
  explicit SingularOperator(const std::string& what) : std::runtime_error(what) {}
};

struct SingularDensity : std::runtime_error {
  explicit SingularDensity(const std::string& what) : std::runtime_error(what) {}
};

struct NonConvergence : std::runtime_error {
  explicit NonConvergence(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class OpTag { General, Hermitian, Positive, Unitary };

// Dense complex square matrix with an advisory role tag. The tag is not
// enforced on construction; call check() where the invariant matters.
struct OperatorMatrix {
  Matrix mat;
  OpTag tag = OpTag::General;

  OperatorMatrix() = default;
  OperatorMatrix(Matrix m, OpTag t = OpTag::General) : mat(std::move(m)), tag(t) {}

  Index dim() const { return mat.rows(); }

  // Throws std::invalid_argument if the tagged property fails at the
  // project tolerances, or if any entry is non-finite.
  void check() const;
};

// Indexed family of same-dimension operators with nonnegative measure weights.
struct WeightedFamily {
  std::vector<OperatorMatrix> members;
  std::vector<double> weights;

  size_t size() const { return members.size(); }
};

inline bool entries_finite(const Matrix& a) { return a.allFinite(); }

inline double herm_deviation(const Matrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline double unitary_deviation(const Matrix& a) {
  Matrix g = a.adjoint() * a;
  g -= Matrix::Identity(a.rows(), a.cols());
  return g.cwiseAbs().maxCoeff();
}

}  // namespace flashpoint
