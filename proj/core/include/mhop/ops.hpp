#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mhop/tensor.hpp"

// Differentiable operations. Every op validates shapes and throws
// std::invalid_argument on mismatch. Matrices are rank-2, row-major.
namespace mhop::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// x[m,n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x[m,n] @ w[n,k] + b[k]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);

// Softmax along the last axis, stabilized by max subtraction. When
// `allowed` is non-empty it has one flag per column of the last axis;
// disallowed columns behave as -inf logits and come out exactly 0.
Tensor softmax(const Tensor& x, std::span<const std::uint8_t> allowed = {});
Tensor log_softmax(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

// Inverted dropout; identity when `training` is false or rate is 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training);

// Row gather: out[i] = table[indices[i]]. Also serves as embedding lookup.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
inline Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> indices) {
  return gather_rows(table, indices);
}
// Flat scatter into a zero vector of `size`: out[indices[i]] = x[i].
Tensor scatter(const Tensor& x, std::span<const std::size_t> indices, std::size_t size);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor reshape(const Tensor& x, Shape shape);

// Single element as a [1] tensor.
Tensor pick(const Tensor& x, std::size_t index);

// -log_softmax(logits)[target] over a flat vector of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
// -log(probs[target]), for inputs that already are likelihoods.
Tensor nll(const Tensor& probs, std::size_t target);
// Sum of absolute differences.
Tensor l1_loss(const Tensor& a, const Tensor& b);

// sum_i softmax(beta * x)_i * positions[i]; positions default to i.
Tensor softargmax(const Tensor& x, double beta, std::span<const double> positions = {});

// sum_k p_k log p_k with p = softmax(logits): the negative entropy.
Tensor neg_entropy(const Tensor& logits);

}  // namespace mhop::ops
