#pragma once

#include "flashpoint/types.hpp"

namespace flashpoint {

// Sum_i weight_i * member_i. Result is tagged positive when every member is.
OperatorMatrix weak_integral(const WeightedFamily& family);

// Positive square root of a positive matrix. Eigenvalues in [-tol, 0) are
// clamped to zero; anything below -tol throws std::invalid_argument.
Matrix positive_sqrt(const Matrix& a, double eig_floor = tol::positive);

// Unitary factor U of the polar decomposition t = U * (t^* t)^{1/2}.
// Throws SingularOperator when the smallest singular value is <= cutoff.
Matrix polar_unitary(const Matrix& t, double sv_cutoff = tol::bijective);

// exp(a * s) by scaling-and-squaring.
Matrix matrix_exp(const Matrix& a, double s = 1.0);

double min_eigenvalue_hermitian(const Matrix& a);
double min_singular_value(const Matrix& a);
bool is_bijective(const Matrix& a, double sv_cutoff = tol::bijective);

// (a + a^*)/2, used before eigensolves on hermitian-tagged input.
inline Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace flashpoint
