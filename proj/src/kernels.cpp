#include "tspe/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tspe/error.hpp"

namespace tspe::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

// Rows handled together so each loaded row of B feeds several outputs.
constexpr std::size_t kRowTile = 8;

// Row-major copy of op(x).
template <class T>
const Matrix<T>& materialize(Op op, const Matrix<T>& x, Matrix<T>& scratch) {
  if (op == Op::N) return x;
  scratch = x.transposed();
  return scratch;
}

// 64-byte SIMD vector of T (GCC vector extension; lowered to narrower code
// on targets without such registers).
template <class T>
using Vec [[gnu::vector_size(64)]] = T;

// Unaligned, aliasing view of the same vector, for loads and stores that keep
// accumulators in registers.
template <class T>
using VecU [[gnu::vector_size(64), gnu::aligned(alignof(T)), gnu::may_alias]] = T;

template <class T>
inline Vec<T> load(const T* p) {
  return *reinterpret_cast<const VecU<T>*>(p);
}

template <class T>
inline void store(T* p, Vec<T> v) {
  *reinterpret_cast<VecU<T>*>(p) = v;
}

// Rows [i, i + R) of C += A * B over V vectors of columns starting at j0,
// accumulating in registers. Every output element sees c, then c + a_0 b_0,
// then + a_1 b_1, ... in ascending k, on every path below, so a row's result
// depends neither on its position in the batch nor on the computing thread.
template <class T, std::size_t R, std::size_t V>
void gemm_tile(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, std::size_t i,
               std::size_t j0) {
  constexpr std::size_t L = sizeof(Vec<T>) / sizeof(T);
  const std::size_t k = a.cols(), n = b.cols();
  Vec<T> acc[R][V];
#pragma GCC unroll 16
  for (std::size_t r = 0; r < R; ++r)
  #pragma GCC unroll 16
    for (std::size_t v = 0; v < V; ++v) acc[r][v] = load<T>(c.data() + (i + r) * n + j0 + v * L);
  const T* ap = a.data() + i * k;
  const T* bp = b.data() + j0;
  for (std::size_t p = 0; p < k; ++p, bp += n) {
    Vec<T> bv[V];
  #pragma GCC unroll 16
    for (std::size_t v = 0; v < V; ++v) bv[v] = load<T>(bp + v * L);
  #pragma GCC unroll 16
    for (std::size_t r = 0; r < R; ++r) {
      const T x = ap[r * k + p];
#pragma GCC unroll 16
      for (std::size_t v = 0; v < V; ++v) acc[r][v] += x * bv[v];
    }
  }
#pragma GCC unroll 16
  for (std::size_t r = 0; r < R; ++r)
  #pragma GCC unroll 16
    for (std::size_t v = 0; v < V; ++v) store<T>(c.data() + (i + r) * n + j0 + v * L, acc[r][v]);
}

// Leftover columns [j0, n), one element at a time, same operation order.
template <class T, std::size_t R>
void gemm_edge(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, std::size_t i,
               std::size_t j0) {
  const std::size_t k = a.cols(), n = b.cols();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = j0; j < n; ++j) {
      T acc = c.data()[(i + r) * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a.data()[(i + r) * k + p] * b.data()[p * n + j];
      c.data()[(i + r) * n + j] = acc;
    }
}

template <class T, std::size_t R>
void gemm_row_tile(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, std::size_t i) {
  constexpr std::size_t L = sizeof(Vec<T>) / sizeof(T);
  const std::size_t n = b.cols();
  std::size_t j0 = 0;
  for (; j0 + 2 * L <= n; j0 += 2 * L) gemm_tile<T, R, 2>(a, b, c, i, j0);
  for (; j0 + L <= n; j0 += L) gemm_tile<T, R, 1>(a, b, c, i, j0);
  if (j0 < n) gemm_edge<T, R>(a, b, c, i, j0);
}

template <class T>
void gemm_rows(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, std::size_t r0,
               std::size_t r1) {
  std::size_t i = r0;
  for (; i + kRowTile <= r1; i += kRowTile) gemm_row_tile<T, kRowTile>(a, b, c, i);
  for (; i < r1; ++i) gemm_row_tile<T, 1>(a, b, c, i);
}

}  // namespace

template <class T>
void gemm(Op op_a, Op op_b, const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
          bool accumulate) {
  const std::size_t m = op_a == Op::N ? a.rows() : a.cols();
  const std::size_t k = op_a == Op::N ? a.cols() : a.rows();
  const std::size_t kb = op_b == Op::N ? b.rows() : b.cols();
  const std::size_t n = op_b == Op::N ? b.cols() : b.rows();
  if (k != kb) throw InvalidArgument("gemm: inner dimensions differ");
  if (accumulate) {
    if (c.rows() != m || c.cols() != n) throw InvalidArgument("gemm: output shape mismatch");
  } else {
    c = Matrix<T>(m, n);
  }
  if (m == 0 || n == 0 || k == 0) return;
  Matrix<T> sa, sb;
  const Matrix<T>& am = materialize(op_a, a, sa);
  const Matrix<T>& bm = materialize(op_b, b, sb);
  const auto tiles = static_cast<std::ptrdiff_t>((m + kRowTile - 1) / kRowTile);
#pragma omp parallel for schedule(static) if (tiles > 1 && m * n * k >= kParallelWork)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const std::size_t r0 = static_cast<std::size_t>(t) * kRowTile;
    gemm_rows(am, bm, c, r0, std::min(m, r0 + kRowTile));
  }
}

template <class T>
void csr_spmm(std::span<const std::size_t> offsets, std::span<const std::uint32_t> columns,
              std::span<const T> weights, const Matrix<T>& x, Matrix<T>& y) {
  const std::size_t n = offsets.size() - 1;
  const std::size_t w = x.cols();
  y = Matrix<T>(n, w);
  const bool weighted = !weights.empty();
#pragma omp parallel for schedule(dynamic, 64) if (n * w >= kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    T* yi = y.data() + i * w;
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
      const T s = weighted ? weights[e] : T(1);
      const T* xr = x.data() + static_cast<std::size_t>(columns[e]) * w;
#pragma omp simd
      for (std::size_t j = 0; j < w; ++j) yi[j] += s * xr[j];
    }
  }
}

void normalized_laplacian_apply(std::span<const std::size_t> offsets,
                                std::span<const std::uint32_t> columns,
                                std::span<const double> inv_sqrt_degree,
                                std::span<const double> x, std::span<double> y) {
  const std::size_t n = offsets.size() - 1;
#pragma omp parallel for schedule(static) if (n >= 4096)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double acc = 0.0;
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
      const std::size_t j = columns[e];
      acc += inv_sqrt_degree[j] * x[j];
    }
    y[i] = x[i] - inv_sqrt_degree[i] * acc;
  }
}

template <class T>
void attention_forward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                       const Matrix<T>& v, std::span<const std::uint8_t> key_mask,
                       std::span<const T> keep, std::span<T> probs, Matrix<T>& out) {
  const std::size_t width = s.width();
  out = Matrix<T>(s.batch * s.q_len, width);
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  const bool drop = !keep.empty();
  const auto jobs = static_cast<std::ptrdiff_t>(s.batch * s.heads);
  const bool par = s.prob_size() * s.head_dim >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / s.heads;
    const std::size_t h = static_cast<std::size_t>(job) % s.heads;
    const std::size_t col = h * s.head_dim;
    std::vector<T> w(s.k_len);
    for (std::size_t i = 0; i < s.q_len; ++i) {
      const T* qi = q.data() + (b * s.q_len + i) * width + col;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.k_len; ++j) {
        if (!key_mask[b * s.k_len + j]) continue;
        const T* kj = k.data() + (b * s.k_len + j) * width + col;
        T dot = 0;
        for (std::size_t d = 0; d < s.head_dim; ++d) dot += qi[d] * kj[d];
        w[j] = dot * scale;
        mx = std::max(mx, w[j]);
      }
      T total = 0;
      for (std::size_t j = 0; j < s.k_len; ++j) {
        if (!key_mask[b * s.k_len + j]) {
          w[j] = 0;
          continue;
        }
        w[j] = std::exp(w[j] - mx);
        total += w[j];
      }
      T* pi = probs.data() + ((b * s.heads + h) * s.q_len + i) * s.k_len;
      T* oi = out.data() + (b * s.q_len + i) * width + col;
      for (std::size_t j = 0; j < s.k_len; ++j) {
        pi[j] = total > 0 ? w[j] / total : T(0);
        T coef = pi[j];
        if (drop) coef *= keep[((b * s.heads + h) * s.q_len + i) * s.k_len + j];
        if (coef == T(0)) continue;
        const T* vj = v.data() + (b * s.k_len + j) * width + col;
        for (std::size_t d = 0; d < s.head_dim; ++d) oi[d] += coef * vj[d];
      }
    }
  }
}

template <class T>
void attention_backward(const AttentionShape& s, const Matrix<T>& q, const Matrix<T>& k,
                        const Matrix<T>& v, std::span<const T> keep, std::span<const T> probs,
                        const Matrix<T>& d_out, Matrix<T>& d_q, Matrix<T>& d_k, Matrix<T>& d_v) {
  const std::size_t width = s.width();
  const T scale = T(1) / std::sqrt(static_cast<T>(s.head_dim));
  const bool drop = !keep.empty();
  const auto jobs = static_cast<std::ptrdiff_t>(s.batch * s.heads);
  const bool par = s.prob_size() * s.head_dim >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / s.heads;
    const std::size_t h = static_cast<std::size_t>(job) % s.heads;
    const std::size_t col = h * s.head_dim;
    std::vector<T> dp(s.k_len);
    for (std::size_t i = 0; i < s.q_len; ++i) {
      const std::size_t base = ((b * s.heads + h) * s.q_len + i) * s.k_len;
      const T* pi = probs.data() + base;
      const T* doi = d_out.data() + (b * s.q_len + i) * width + col;
      T inner = 0;
      for (std::size_t j = 0; j < s.k_len; ++j) {
        if (pi[j] == T(0)) {
          dp[j] = 0;
          continue;
        }
        const T kp = drop ? keep[base + j] : T(1);
        const T* vj = v.data() + (b * s.k_len + j) * width + col;
        T* dvj = d_v.data() + (b * s.k_len + j) * width + col;
        T dot = 0;
        for (std::size_t d = 0; d < s.head_dim; ++d) {
          dot += doi[d] * vj[d];
          dvj[d] += pi[j] * kp * doi[d];
        }
        dp[j] = dot * kp;
        inner += pi[j] * dp[j];
      }
      const T* qi = q.data() + (b * s.q_len + i) * width + col;
      T* dqi = d_q.data() + (b * s.q_len + i) * width + col;
      for (std::size_t j = 0; j < s.k_len; ++j) {
        if (pi[j] == T(0)) continue;
        const T ds = pi[j] * (dp[j] - inner) * scale;
        const T* kj = k.data() + (b * s.k_len + j) * width + col;
        T* dkj = d_k.data() + (b * s.k_len + j) * width + col;
        for (std::size_t d = 0; d < s.head_dim; ++d) {
          dqi[d] += ds * kj[d];
          dkj[d] += ds * qi[d];
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
template void attention_backward<float>(const AttentionShape&, const Matrix<float>&,
                                        const Matrix<float>&, const Matrix<float>&,
                                        std::span<const float>, std::span<const float>,
                                        const Matrix<float>&, Matrix<float>&, Matrix<float>&,
                                        Matrix<float>&);
template void attention_backward<double>(const AttentionShape&, const Matrix<double>&,
                                         const Matrix<double>&, const Matrix<double>&,
                                         std::span<const double>, std::span<const double>,
                                         const Matrix<double>&, Matrix<double>&,
                                         Matrix<double>&, Matrix<double>&);

}  // namespace tspe::kernels
