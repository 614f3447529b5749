// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "tspe/graph.hpp"
#include "tspe/kernels.hpp"
#include "tspe/kernels_ref.hpp"
#include "tspe/rng.hpp"

namespace {

using namespace tspe;

template <class T>
Matrix<T> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix<T> m(r, c);
  Rng rng(seed);
  for (auto& x : m.storage()) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return m;
}

SparseGraph random_graph(std::size_t n, std::size_t avg_degree, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  for (std::size_t e = 0; e < n * avg_degree / 2; ++e) {
    const auto a = static_cast<NodeIndex>(rng.below(n));
    const auto b = static_cast<NodeIndex>(rng.below(n));
    if (a != b) edges.emplace_back(a, b);
  }
  return SparseGraph::from_edges(std::move(ids), edges);
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix<float>(n, 64, 1);
  const auto b = random_matrix<float>(64, 64, 2);
  Matrix<float> c;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::gemm(kernels::Op::N, kernels::Op::N, a, b, c);
    } else {
      kernels::ref::gemm(kernels::Op::N, kernels::Op::N, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 64));
}
BENCHMARK(BM_Gemm<true>)->Arg(256)->Arg(4096);
BENCHMARK(BM_Gemm<false>)->Arg(256)->Arg(4096);

template <bool Parallel>
void BM_Laplacian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SparseGraph g = random_graph(n, 10, 3);
  std::vector<double> inv(n), x(n, 1.0), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv[i] = g.degree(static_cast<NodeIndex>(i)) ? 1.0 / std::sqrt(g.degree(static_cast<NodeIndex>(i))) : 0.0;
  }
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::normalized_laplacian_apply(g.offsets(), g.adjacency(), inv, x, y);
    } else {
      kernels::ref::normalized_laplacian_apply(g.offsets(), g.adjacency(), inv, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Laplacian<true>)->Arg(13460)->Arg(100000);
BENCHMARK(BM_Laplacian<false>)->Arg(13460)->Arg(100000);

template <bool Parallel>
void BM_SpMM(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SparseGraph g = random_graph(n, 10, 4);
  const auto x = random_matrix<double>(n, 150, 5);
  Matrix<double> y;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::csr_spmm<double>(g.offsets(), g.adjacency(), {}, x, y);
    } else {
      kernels::ref::csr_spmm<double>(g.offsets(), g.adjacency(), {}, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_SpMM<true>)->Arg(13460);
BENCHMARK(BM_SpMM<false>)->Arg(13460);

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
  kernels::AttentionShape s{20, static_cast<std::size_t>(state.range(0)),
                            static_cast<std::size_t>(state.range(0)), 8, 8};
  const auto q = random_matrix<float>(s.batch * s.q_len, s.width(), 6);
  const auto k = random_matrix<float>(s.batch * s.k_len, s.width(), 7);
  const auto v = random_matrix<float>(s.batch * s.k_len, s.width(), 8);
  std::vector<std::uint8_t> mask(s.batch * s.k_len, 1);
  std::vector<float> probs(s.prob_size());
  Matrix<float> out(s.batch * s.q_len, s.width());
  for (auto _ : state) {
    out.fill(0.0f);
    if constexpr (Parallel) {
      kernels::attention_forward<float>(s, q, k, v, mask, {}, probs, out);
    } else {
      kernels::ref::attention_forward<float>(s, q, k, v, mask, {}, probs, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Attention<true>)->Arg(16)->Arg(128);
BENCHMARK(BM_Attention<false>)->Arg(16)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
