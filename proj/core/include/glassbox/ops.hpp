#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "glassbox/tensor.hpp"

// Differentiable operations on Tensor. All ops validate shapes, record a tape
// node when any input requires a gradient, and raise NumericError if their
// output is not finite.
namespace glassbox {

Tensor matmul(const Tensor& a, const Tensor& b);

enum class ElementwiseOp { kAdd, kSub, kMul, kDiv, kRelu, kSigmoid, kTanh, kLog, kExp, kNeg };

// Dispatch form covering every elementwise kernel; binary kinds require `y`.
Tensor elementwise(ElementwiseOp op, const Tensor& x, const Tensor* y = nullptr);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// Raises DomainError on any non-positive entry.
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);

// a * x + b with constants a, b.
Tensor affine(const Tensor& x, double scale, double shift);
inline Tensor scale(const Tensor& x, double factor) { return affine(x, factor, 0.0); }

// x[m,n] + bias[n] broadcast across rows (bias may be [n] or [1,n]).
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x[m,n] scaled row-wise by column[m,1].
Tensor mul_col(const Tensor& x, const Tensor& column);
// x[m,n] divided row-wise by column[m,1].
Tensor div_col(const Tensor& x, const Tensor& column);
// Sum over the last axis: [m,n] -> [m,1].
Tensor row_sum(const Tensor& x);
// Columns of a 2-D tensor, in the given order (repeats allowed).
Tensor select_columns(const Tensor& x, std::span<const std::size_t> indices);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Stable (max-subtracted) softmax along `axis` (0 or 1 for matrices, 0 for vectors).
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// Forward value is `hard`; the backward pass routes the incoming gradient to
// `soft` unchanged (straight-through estimator).
Tensor straight_through(const Tensor& soft, std::vector<double> hard);

enum class LossKind { kCrossEntropyWithLogits, kMeanSquaredError };

// Mean cross-entropy of logits[m,C] against integer class labels (log-sum-exp form).
Tensor cross_entropy_with_logits(const Tensor& logits, std::span<const std::size_t> labels);
Tensor mse(const Tensor& prediction, const Tensor& target);
// For kCrossEntropyWithLogits the target holds class indices, one per row.
Tensor loss(LossKind kind, const Tensor& prediction, const Tensor& target);

}  // namespace glassbox
