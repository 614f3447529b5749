#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tspe/encoding.hpp"
#include "tspe/graph.hpp"
#include "tspe/model.hpp"

namespace tspe {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 20;
  double valid_fraction = 0.1;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  void validate() const;
};

/// Token matrix of one subgraph: the rows of `inputs` for its members.
template <class T>
Matrix<T> gather_tokens(const Matrix<T>& inputs, const Subgraph& subgraph);

/// Splits `indices` into batches of at most batch_size pairs (shuffled when a
/// seed is given), each padded per side to its longest subgraph.
template <class T>
std::vector<PairBatch<T>> make_batches(const PairDataset& pairs, std::span<const std::size_t> indices,
                                       const Matrix<T>& inputs, const SubgraphCatalog& catalog,
                                       std::size_t batch_size,
                                       std::optional<std::uint64_t> shuffle_seed);

/// Adam with bias correction.
template <class T>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<ad::Parameter<T>>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// One optimization step on a batch; returns the batch loss.
template <class T>
double train_step(TransformerModel<T>& model, Adam<T>& optimizer, const PairBatch<T>& batch,
                  Rng* dropout_rng);

/// Mean BCE of the model over pre-built batches (no dropout).
template <class T>
double evaluate_loss(TransformerModel<T>& model, const std::vector<PairBatch<T>>& batches);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  TransformerModel<float> model;  // best-validation parameters
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> valid_indices;
};

/// Source of the per-node transformer input.
struct InputSource {
  const EncodingBundle* bundle = nullptr;
  PeMode mode = PeMode::SPE;
};

/// Holds out a stratified valid_fraction of `indices`, trains with Adam, stops
/// early on validation loss, and returns the best parameters.
TrainResult train(TransformerModel<float> model, const PairDataset& pairs,
                  std::span<const std::size_t> indices, const InputSource& input,
                  const SubgraphCatalog& catalog, const TrainConfig& cfg);

/// Sigmoid probabilities for the selected pairs, in index order.
std::vector<double> predict(TransformerModel<float>& model, const PairDataset& pairs,
                            std::span<const std::size_t> indices, const Matrix<float>& inputs,
                            const SubgraphCatalog& catalog, std::size_t batch_size = 64);

/// Stratified split of indices into (train, valid).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const PairDataset& pairs, std::span<const std::size_t> indices, double fraction,
    std::uint64_t seed);

}  // namespace tspe
