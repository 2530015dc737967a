#pragma once

#include <vector>

// Dense helpers for the tiny (<= 6 x 6) systems in the model fits.

namespace escalate::la {

using Matrix = std::vector<std::vector<double>>;

Matrix identity(int n);

/// Lower Cholesky factor of a symmetric positive-definite matrix.
/// Throws std::runtime_error if the matrix is not positive definite.
Matrix chol_lower(const Matrix& a);

/// Solve A x = b given the lower factor of A.
std::vector<double> chol_solve(const Matrix& lower, std::vector<double> b);

/// Draw from N(mean, H^{-1}) given the lower factor of the precision H and
/// a vector of iid standard normals: x = mean + L^{-T} z.
std::vector<double> mvn_from_precision(const Matrix& lower, const std::vector<double>& mean,
                                       const std::vector<double>& normals);

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);

}  // namespace escalate::la
