#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tspe/graph.hpp"
#include "tspe/matrix.hpp"

namespace tspe {

struct WalkConfig {
  double p = 1.0;  // return parameter: weight 1/p on stepping back
  double q = 1.0;  // in-out parameter: weight 1/q on moving away
  std::size_t walk_length = 80;
  std::size_t walks_per_node = 10;
  std::uint64_t seed = 1;
  void validate() const;
};

struct SkipGramConfig {
  std::size_t dim = 64;
  std::size_t window = 2;
  std::size_t negative_samples = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 1e-4 of its start
  std::uint64_t seed = 1;
  void validate() const;
};

using Walk = std::vector<NodeIndex>;

/// Second-order biased walks: from v with previous node t, neighbor x has
/// weight 1/p if x == t, 1 if x is adjacent to t, 1/q otherwise. Rounds of
/// one walk per node run over a seeded permutation of the start nodes.
std::vector<Walk> generate_walks(const SparseGraph& graph, const WalkConfig& cfg);

struct NodeEmbeddings {
  DenseMatrix matrix;             // N x dim
  std::vector<double> epoch_loss;  // mean logistic loss per epoch
};

/// Optional per-epoch observer (epoch index, current input vectors).
using EpochObserver = std::function<void(std::size_t, const DenseMatrix&)>;

/// Skip-gram with negative sampling (unigram^0.75 noise), single-threaded.
NodeEmbeddings train_skipgram(const std::vector<Walk>& walks, const SkipGramConfig& cfg,
                              std::size_t num_nodes, const EpochObserver& observer = {});

}  // namespace tspe
