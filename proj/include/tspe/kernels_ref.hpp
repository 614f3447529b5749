#pragma once

// Serial, straightforward versions of the kernels in kernels.hpp.

#include "tspe/kernels.hpp"

namespace tspe::kernels::ref {

template <class T>
void gemm(Op op_a, Op op_b, const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
          bool accumulate = false);

template <class T>
void csr_spmm(std::span<const std::size_t> offsets, std::span<const std::uint32_t> columns,
              std::span<const T> weights, const Matrix<T>& x, Matrix<T>& y);

void normalized_laplacian_apply(std::span<const std::size_t> offsets,
                                std::span<const std::uint32_t> columns,
                                std::span<const double> inv_sqrt_degree,
                                std::span<const double> x, std::span<double> y);

template <class T>
void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                       const Matrix<T>& v, std::span<const std::uint8_t> key_mask,
                       std::span<const T> keep, std::span<T> probs, Matrix<T>& out);

}  // namespace tspe::kernels::ref
