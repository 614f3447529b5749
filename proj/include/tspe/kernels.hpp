#pragma once

// Data-parallel kernels (OpenMP). Each has a serial counterpart in
// kernels_ref.hpp that the tests and benchmarks compare against.

#include <cstddef>
#include <cstdint>
#include <span>

#include "tspe/matrix.hpp"

namespace tspe::kernels {

enum class Op { N, T };

/// C = op(A) * op(B), or C += ... when accumulate is set. C is resized when
/// not accumulating.
template <class T>
void gemm(Op op_a, Op op_b, const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
          bool accumulate = false);

/// Y = S * X where S is a CSR pattern with optional per-entry weights
/// (unit weights when `weights` is empty).
template <class T>
void csr_spmm(std::span<const std::size_t> offsets, std::span<const std::uint32_t> columns,
              std::span<const T> weights, const Matrix<T>& x, Matrix<T>& y);

/// y = x - D^{-1/2} A D^{-1/2} x given inv_sqrt_degree (0 for isolated nodes).
void normalized_laplacian_apply(std::span<const std::size_t> offsets,
                                std::span<const std::uint32_t> columns,
                                std::span<const double> inv_sqrt_degree,
                                std::span<const double> x, std::span<double> y);

/// Layout of a batched multi-head attention call: `batch` independent
/// problems, queries/keys stored as consecutive blocks of rows, heads as
/// consecutive column slices of width head_dim.
struct AttentionShape {
  std::size_t batch = 0;
  std::size_t q_len = 0;
  std::size_t k_len = 0;
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  std::size_t width() const { return heads * head_dim; }
  std::size_t prob_size() const { return batch * heads * q_len * k_len; }
};

/// Scaled dot-product attention with a key padding mask (nonzero = valid key).
/// probs receives the softmax weights [batch][head][q][k] (exact zeros at
/// masked keys). `keep`, when nonempty, holds inverted-dropout multipliers
/// applied to the weights before mixing the values.
template <class T>
void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                       const Matrix<T>& v, std::span<const std::uint8_t> key_mask,
                       std::span<const T> keep, std::span<T> probs, Matrix<T>& out);

/// Accumulates gradients w.r.t. q, k, v (all must be pre-sized).
template <class T>
void attention_backward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                        const Matrix<T>& v, std::span<const T> keep, std::span<const T> probs,
                        const Matrix<T>& d_out, Matrix<T>& d_q, Matrix<T>& d_k, Matrix<T>& d_v);

}  // namespace tspe::kernels
