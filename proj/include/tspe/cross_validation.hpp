#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tspe/encoding.hpp"
#include "tspe/graph.hpp"
#include "tspe/model.hpp"
#include "tspe/train.hpp"

namespace tspe {

struct FoldPlan {
  std::vector<std::vector<std::size_t>> folds;  // sorted dataset indices

  std::size_t k() const noexcept { return folds.size(); }
  /// Every index not in fold `f`, sorted.
  std::vector<std::size_t> complement(std::size_t f) const;
  bool operator==(const FoldPlan&) const = default;
};

/// Seeded shuffle within each class, then round-robin over folds. The
/// negatives continue the rotation where the positives stopped, so fold sizes
/// also differ by at most one.
FoldPlan stratified_kfold(const PairDataset& dataset, std::size_t k, std::uint64_t seed);

struct FoldMetrics {
  double roc_auc = 0.0;
  double accuracy = 0.0;
};

struct MetricsReport {
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> fold_seeds;
  std::vector<FoldMetrics> folds;
  std::vector<std::size_t> best_epochs;
  std::size_t leak_checks = 0;

  FoldMetrics mean() const;
  FoldMetrics std() const;  // sample standard deviation (n - 1)
  /// Copy without the n folds of lowest ROC AUC (ties drop the later fold).
  MetricsReport drop_worst(std::size_t n) const;

  nlohmann::json to_json() const;
  std::string to_table(const std::string& title = "") const;
};

/// "0.8009 ± 0.0152"
std::string format_mean_std(double mean, double std);

struct CvOptions {
  std::size_t k = 10;
  std::uint64_t seed = 1;
  PeMode mode = PeMode::SPE;
  int jobs = 1;
};

/// Trains a fresh model per fold on the complement of the fold and scores the
/// held-out fold. ModelConfig::input_width is taken from the encodings.
MetricsReport cross_validate(const PairDataset& dataset, const EncodingBundle& encodings,
                             const SubgraphCatalog& catalog, ModelConfig model_cfg,
                             TrainConfig train_cfg, const CvOptions& options);

/// NoPE / LPE / SPE rows side by side, optionally with a drop-worst block.
std::string ablation_table(const std::vector<std::pair<PeMode, MetricsReport>>& reports,
                           std::size_t drop_worst = 0);

}  // namespace tspe
