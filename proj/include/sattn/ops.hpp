#pragma once

#include <span>
#include <vector>

#include "sattn/autodiff.hpp"

// Differentiable primitives. Each records one node on the operands' tape.
// Operands must live on the same tape.
namespace sattn {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product of equally shaped operands.
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// x (n x m) + b broadcast over rows; b has shape {m}.
Var add_row_bias(Var x, Var b);

Var softmax_rows(Var scores);
Var relu(Var x);
/// Exact (erf-based) GELU.
Var gelu(Var x);
/// Per-row normalization with affine gamma/beta of shape {m}.
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

Var slice_cols(Var x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var reshape(Var x, Shape shape);
/// Stacks equally shaped tensors along a new leading axis.
Var stack(std::span<const Var> parts);
/// Slice `index` of the leading axis.
Var select(Var x, std::size_t index);

/// Multi-channel 2-D convolution, stride 1, zero padding (K-1)/2.
/// x: {Cin, H, W}; kernel: {Cout, Cin, K, K} with K odd. Output {Cout, H, W}.
Var conv2d_same(Var x, Var kernel);

/// x * mask, where mask is a constant (already scaled) keep mask.
Var apply_mask(Var x, const Tensor& mask);
Var sum(Var x);
/// Mean squared error between equally shaped operands, as a scalar.
Var mse_loss(Var pred, Var target);

/// Plain-tensor convolution with the same contract as conv2d_same.
Tensor conv2d_same(const Tensor& x, const Tensor& kernel);

}  // namespace sattn
