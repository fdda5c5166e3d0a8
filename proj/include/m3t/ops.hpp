#pragma once

#include <cstddef>
#include <vector>

#include "m3t/tensor.hpp"

namespace m3t {

enum class ElementwiseKind { add, sub, mul, scale, tanh, square };

// Dispatcher over the elementwise family. `b` is required for the binary
// kinds, ignored for tanh/square. For `scale`, `b` must be a one-element
// tensor whose value is used as a constant factor (no gradient flows to it).
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b = nullptr);

// Binary ops broadcast numpy-style (trailing axes aligned, extent 1 stretches).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, Real factor);
Tensor add_scalar(const Tensor& a, Real value);
Tensor neg(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);

// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes (rank 2 or 3).
Tensor transpose(const Tensor& a);
// Rows of `table` [K x d] picked by `indices`; gradient scatters back.
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices);

Tensor reshape(const Tensor& a, Shape shape);
// Contiguous range [start, start+length) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);

Tensor sum(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis, bool keepdim = true);
Tensor mean(const Tensor& a);
Tensor mse(const Tensor& a, const Tensor& b);

// Cross-correlation over the last axis with zero "same" padding
// (pad = dilation*(K-1)/2 each side), output length ceil(T/stride).
// x: [C_in x T] or [B x C_in x T]; kernel: [C_out x C_in x K] with K odd;
// bias: optional [C_out].
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor* bias, std::size_t stride,
              std::size_t dilation);

// Repeats every element of the last axis `factor` times.
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

}  // namespace m3t
