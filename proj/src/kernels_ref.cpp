#include "tspe/kernels_ref.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "tspe/error.hpp"

namespace tspe::kernels::ref {

template <class T>
void gemm(Op op_a, Op op_b, const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
          bool accumulate) {
  auto at = [&](std::size_t i, std::size_t p) { return op_a == Op::N ? a(i, p) : a(p, i); };
  auto bt = [&](std::size_t p, std::size_t j) { return op_b == Op::N ? b(p, j) : b(j, p); };
  const std::size_t m = op_a == Op::N ? a.rows() : a.cols();
  const std::size_t k = op_a == Op::N ? a.cols() : a.rows();
  const std::size_t n = op_b == Op::N ? b.cols() : b.rows();
  if (k != (op_b == Op::N ? b.rows() : b.cols())) throw InvalidArgument("gemm: inner dims");
  if (!accumulate) c = Matrix<T>(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += at(i, p) * bt(p, j);
      c(i, j) += acc;
    }
  }
}

template <class T>
void csr_spmm(std::span<const std::size_t> offsets, std::span<const std::uint32_t> columns,
              std::span<const T> weights, const Matrix<T>& x, Matrix<T>& y) {
  const std::size_t n = offsets.size() - 1;
  y = Matrix<T>(n, x.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e)
      for (std::size_t j = 0; j < x.cols(); ++j)
        y(i, j) += (weights.empty() ? T(1) : weights[e]) * x(columns[e], j);
}

void normalized_laplacian_apply(std::span<const std::size_t> offsets,
                                std::span<const std::uint32_t> columns,
                                std::span<const double> inv_sqrt_degree,
                                std::span<const double> x, std::span<double> y) {
  const std::size_t n = offsets.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e)
      acc += inv_sqrt_degree[i] * inv_sqrt_degree[columns[e]] * x[columns[e]];
    y[i] = x[i] - acc;
  }
}

template <class T>
void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                       const Matrix<T>& v, std::span<const std::uint8_t> key_mask,
                       std::span<const T> keep, std::span<T> probs, Matrix<T>& out) {
  out = Matrix<T>(s.batch * s.q_len, s.width());
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      for (std::size_t i = 0; i < s.q_len; ++i) {
        std::vector<T> logits(s.k_len, -std::numeric_limits<T>::infinity());
        for (std::size_t j = 0; j < s.k_len; ++j) {
          if (!key_mask[b * s.k_len + j]) continue;
          T dot = 0;
          for (std::size_t d = 0; d < s.head_dim; ++d)
            dot += q(b * s.q_len + i, h * s.head_dim + d) * k(b * s.k_len + j, h * s.head_dim + d);
          logits[j] = dot * scale;
        }
        T mx = -std::numeric_limits<T>::infinity();
        for (T l : logits) mx = std::max(mx, l);
        T total = 0;
        for (T& l : logits) {
          l = std::isinf(l) ? T(0) : std::exp(l - mx);
          total += l;
        }
        for (std::size_t j = 0; j < s.k_len; ++j) {
          const std::size_t idx = ((b * s.heads + h) * s.q_len + i) * s.k_len + j;
          probs[idx] = total > 0 ? logits[j] / total : T(0);
          const T coef = probs[idx] * (keep.empty() ? T(1) : keep[idx]);
          for (std::size_t d = 0; d < s.head_dim; ++d)
            out(b * s.q_len + i, h * s.head_dim + d) += coef * v(b * s.k_len + j, h * s.head_dim + d);
        }
      }
    }
  }
}

template void gemm<float>(Op, Op, const Matrix<float>&, const Matrix<float>&, Matrix<float>&, bool);
template void gemm<double>(Op, Op, const Matrix<double>&, const Matrix<double>&, Matrix<double>&,
                           bool);
template void csr_spmm<float>(std::span<const std::size_t>, std::span<const std::uint32_t>,
                              std::span<const float>, const Matrix<float>&, Matrix<float>&);
template void csr_spmm<double>(std::span<const std::size_t>, std::span<const std::uint32_t>,
                               std::span<const double>, const Matrix<double>&, Matrix<double>&);
template void attention_forward<float>(const AttentionShape&, const Matrix<float>&,
                                       const Matrix<float>&, const Matrix<float>&,
                                       std::span<const std::uint8_t>, std::span<const float>,
                                       std::span<float>, Matrix<float>&);
template void attention_forward<double>(const AttentionShape&, const Matrix<double>&,
                                        const Matrix<double>&, const Matrix<double>&,
                                        std::span<const std::uint8_t>, std::span<const double>,
                                        std::span<double>, Matrix<double>&);

}  // namespace tspe::kernels::ref
