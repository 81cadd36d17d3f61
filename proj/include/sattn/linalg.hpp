#pragma once

#include <vector>

#include "sattn/tensor.hpp"

namespace sattn {

/// Singular values of a matrix (one-sided Jacobi), nonincreasing, min(m, n) of them.
std::vector<double> svd_singular_values(const Tensor& a);

/// Thin QR factor of a tall matrix (rows >= cols) with diag(R) > 0.
/// Throws NumericError if the columns are numerically dependent.
Tensor orthonormal_columns(const Tensor& a);

}  // namespace sattn
