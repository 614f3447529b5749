#include <algorithm>
#include <cmath>
#include <string>

#include "tspe/error.hpp"
#include "tspe/graph.hpp"
#include "tspe/rng.hpp"

namespace tspe {

namespace {

// Smallest family size s such that grouping K subgraphs into families of s
// yields at least `positives` same-family pairs.
std::size_t family_size_for(std::size_t k, std::size_t positives) {
  for (std::size_t s = 2; s <= k; ++s) {
    std::size_t full = k / s;
    std::size_t rest = k % s;
    std::size_t pairs = full * s * (s - 1) / 2 + rest * (rest - 1) / 2;
    if (pairs >= positives) return s;
  }
  return 0;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticParams& p) {
  if (!(p.overlap_fraction >= 0.0 && p.overlap_fraction <= 1.0)) {
    throw InvalidArgument("overlap_fraction must lie in [0, 1]");
  }
  if (!(p.p_bg >= 0.0 && p.p_bg <= p.p_in && p.p_in <= 1.0)) {
    throw InvalidArgument("require 0 <= p_bg <= p_in <= 1");
  }
  if (p.module_size < 2) throw InvalidArgument("module_size must be >= 2");
  if (p.num_subgraphs < 2) throw InvalidArgument("num_subgraphs must be >= 2");
  if (p.module_size > p.num_nodes) throw InvalidArgument("module_size exceeds num_nodes");
  if (p.num_pairs < 2) throw InvalidArgument("num_pairs must be >= 2");

  const std::size_t k = p.num_subgraphs;
  const std::size_t num_pos = p.num_pairs / 2;
  const std::size_t num_neg = p.num_pairs - num_pos;
  const std::size_t fam = family_size_for(k, num_pos);
  if (fam == 0) throw InvalidArgument("too many positive pairs for the subgraph count");

  const auto copied = static_cast<std::size_t>(
      std::llround(p.overlap_fraction * static_cast<double>(p.module_size)));
  const std::size_t fresh = p.module_size - copied;
  const std::size_t num_families = (k + fam - 1) / fam;
  const std::size_t needed = num_families * p.module_size + (k - num_families) * fresh;
  if (needed > p.num_nodes) {
    throw InvalidArgument("infeasible sizes: modules need " + std::to_string(needed) +
                          " nodes, graph has " + std::to_string(p.num_nodes));
  }

  Rng rng(derive_seed(p.seed, "synthetic"));

  std::vector<NodeIndex> pool(p.num_nodes);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<NodeIndex>(i);
  rng.shuffle(pool);
  std::size_t next = 0;
  auto take = [&](std::size_t count, std::vector<NodeIndex>& into) {
    for (std::size_t i = 0; i < count; ++i) into.push_back(pool[next++]);
  };

  std::vector<Subgraph> subgraphs(k);
  std::vector<std::size_t> family(k);
  for (std::size_t j = 0; j < k; ++j) {
    subgraphs[j].id = "d" + std::to_string(j);
    family[j] = j / fam;
    const std::size_t root = family[j] * fam;
    if (j == root) {
      take(p.module_size, subgraphs[j].members);
    } else {
      std::vector<NodeIndex> source = subgraphs[root].members;
      rng.shuffle(source);
      subgraphs[j].members.assign(source.begin(),
                                  source.begin() + static_cast<std::ptrdiff_t>(copied));
      take(fresh, subgraphs[j].members);
    }
  }

  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  for (const auto& s : subgraphs) {
    for (std::size_t a = 0; a < s.members.size(); ++a) {
      for (std::size_t b = a + 1; b < s.members.size(); ++b) {
        if (s.members[a] != s.members[b] && rng.bernoulli(p.p_in)) {
          edges.emplace_back(s.members[a], s.members[b]);
        }
      }
    }
  }
  for (NodeIndex u = 0; u < p.num_nodes; ++u) {
    for (NodeIndex v = u + 1; v < p.num_nodes; ++v) {
      if (rng.bernoulli(p.p_bg)) edges.emplace_back(u, v);
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> same, cross;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      (family[a] == family[b] ? same : cross).emplace_back(a, b);
    }
  }
  if (same.size() < num_pos || cross.size() < num_neg) {
    throw InvalidArgument("not enough distinct subgraph pairs for num_pairs");
  }
  rng.shuffle(same);
  rng.shuffle(cross);

  std::vector<PairRecord> records;
  records.reserve(p.num_pairs);
  auto emit = [&](std::pair<std::size_t, std::size_t> ab, bool positive) {
    if (rng.bernoulli(0.5)) std::swap(ab.first, ab.second);
    // Positive scores lie in (1, 3], negative in (-1, 0]: the label is the
    // same under either threshold mode.
    const double u = rng.uniform();
    const double score = positive ? 1.0 + 2.0 * (1.0 - u) : -u;
    records.push_back(PairRecord{ab.first, ab.second, score});
  };
  for (std::size_t i = 0; i < num_pos; ++i) emit(same[i], true);
  for (std::size_t i = 0; i < num_neg; ++i) emit(cross[i], false);
  rng.shuffle(records);

  std::vector<std::string> ids(p.num_nodes);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = "n" + std::to_string(i);

  SyntheticDataset out;
  out.graph = SparseGraph::from_edges(std::move(ids), edges);
  out.catalog = SubgraphCatalog(std::move(subgraphs), p.num_nodes);
  out.pairs = PairDataset(std::move(records), ThresholdMode::RR0);
  out.family = std::move(family);
  return out;
}

}  // namespace tspe
