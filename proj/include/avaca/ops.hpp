#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avaca/autograd.hpp"

// Differentiable primitives. Every op validates shapes and throws
// DimensionError / ParameterError before touching data.
namespace avaca::ops {

// (m×k)·(k×n)
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// x (m×n) plus a length-n bias on every row.
Var add_bias(const Var& x, const Var& bias);
// a·x + b elementwise.
Var affine(const Var& x, double a, double b);
// Broadcast a one-element array to `shape`.
Var broadcast_scalar(const Var& s, const Shape& shape);
Var reshape(const Var& x, Shape shape);

Var relu(const Var& x);
Var sigmoid(const Var& x);
// log(clamp(x, lo, hi)); the gradient is zero where the clamp is active.
Var log_clamped(const Var& x, double lo, double hi);
Var square(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);

// Row-wise softmax of x/scale with max subtraction.
Var softmax_rows(const Var& x, double scale);

Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
Var concat_cols(const std::vector<Var>& parts);
// Row i of the result is x[i+1] - x[i].
Var row_diff(const Var& x);
// Flat elements of x at `indices`, as a vector.
Var gather(const Var& x, std::span<const std::size_t> indices);

// "Same" zero-padded temporal convolution.
// seq t×d_in, kernel w×d_in×d_out, bias d_out -> t×d_out. w must be odd.
Var conv1d(const Var& seq, const Var& kernel, const Var& bias);
// "Same" zero-padded convolution of a single-channel t×d map.
// kernel h×w×c_out, bias c_out -> t×d×c_out. h and w must be odd.
Var conv2d(const Var& map, const Var& kernel, const Var& bias);
// 1×1 channel mixing: x t×d×c, weight c, bias 1 -> t×d.
Var channel_mix(const Var& x, const Var& weight, const Var& bias);

}  // namespace avaca::ops
