#include "escalate/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace escalate::la {

Matrix identity(int n) {
  Matrix m(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

Matrix chol_lower(const Matrix& a) {
  int n = static_cast<int>(a.size());
  Matrix l(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[i][j];
      for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        if (sum <= 0.0) throw std::runtime_error("chol_lower: matrix not positive definite");
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }
  return l;
}

std::vector<double> chol_solve(const Matrix& lower, std::vector<double> b) {
  int n = static_cast<int>(lower.size());
  // forward then backward substitution: L y = b, L^T x = y
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < i; ++k) b[i] -= lower[i][k] * b[k];
    b[i] /= lower[i][i];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) b[i] -= lower[k][i] * b[k];
    b[i] /= lower[i][i];
  }
  return b;
}

std::vector<double> mvn_from_precision(const Matrix& lower, const std::vector<double>& mean,
                                       const std::vector<double>& normals) {
  int n = static_cast<int>(lower.size());
  std::vector<double> x(normals);
  // solve L^T x = z so that cov(x) = (L L^T)^{-1}
  for (int i = n - 1; i >= 0; --i) {
    for (int k = i + 1; k < n; ++k) x[i] -= lower[k][i] * x[k];
    x[i] /= lower[i][i];
  }
  for (int i = 0; i < n; ++i) x[i] += mean[i];
  return x;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += a[i][j] * x[j];
  return out;
}

}  // namespace escalate::la
