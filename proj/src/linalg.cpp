#include "sattn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sattn/errors.hpp"

namespace sattn {

std::vector<double> svd_singular_values(const Tensor& a) {
  require_matrix(a, "svd_singular_values");
  if (a.size() == 0) throw ShapeError("svd_singular_values: empty matrix");
  if (!a.all_finite()) throw NumericError("svd_singular_values: non-finite input");

  // Work column-wise on the tall orientation; store columns contiguously.
  const bool tall = a.rows() >= a.cols();
  const std::size_t m = tall ? a.rows() : a.cols();
  const std::size_t n = tall ? a.cols() : a.rows();
  std::vector<std::vector<double>> col(n, std::vector<double>(m));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (tall) col[j][i] = a(i, j);
      else col[i][j] = a(i, j);
    }

  constexpr double tol = 1e-15;
  constexpr int max_sweeps = 80;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += col[p][i] * col[p][i];
          beta += col[q][i] * col[q][i];
          gamma += col[p][i] * col[q][i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = col[p][i], uq = col[q][i];
          col[p][i] = c * up - s * uq;
          col[q][i] = s * up + c * uq;
        }
      }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (double v : col[j]) s += v * v;
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

Tensor orthonormal_columns(const Tensor& a) {
  require_matrix(a, "orthonormal_columns");
  const std::size_t m = a.rows(), n = a.cols();
  if (m < n) throw ShapeError("orthonormal_columns: needs rows >= cols, got " + shape_to_string(a.shape()));
  Tensor q = a;
  // Modified Gram-Schmidt, applied twice for orthogonality at machine precision.
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < j; ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < m; ++i) d += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < m; ++i) q(i, j) -= d * q(i, k);
      }
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (!(norm > 1e-12)) throw NumericError("orthonormal_columns: rank-deficient input");
    for (std::size_t i = 0; i < m; ++i) q(i, j) /= norm;
  }
  return q;
}

}  // namespace sattn
