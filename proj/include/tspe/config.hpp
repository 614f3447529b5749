#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tspe/encoding.hpp"
#include "tspe/graph.hpp"
#include "tspe/model.hpp"
#include "tspe/node2vec.hpp"
#include "tspe/train.hpp"

namespace tspe {

/// Everything a run needs. Serialized as one flat JSON object whose keys are
/// also the CLI flag names.
struct RunConfig {
  // Inputs and outputs.
  std::string graph;
  std::string catalog;
  std::string pairs;
  std::string out;
  std::string checkpoint;
  std::string embeddings;  // optional precomputed `embed` container
  std::string encodings;   // optional precomputed `pe` container

  std::uint64_t seed = 1;  // master seed; every stage seed derives from it
  ThresholdMode mode = ThresholdMode::RR0;
  PeMode pe = PeMode::SPE;
  int jobs = 1;
  std::size_t folds = 10;
  std::size_t drop_worst_fold = 0;
  bool ablation = false;
  bool use_lcc = false;
  bool strict_catalog = false;

  WalkConfig walk;
  SkipGramConfig skipgram;
  std::size_t lpe_dim = 64;
  std::size_t gpe_dim = 8;
  GeeAdjacency gee_adjacency = GeeAdjacency::Plain;
  bool gpe_scale_by_sigma = false;
  double eig_tol = 1e-8;
  EigenMethod eig_method = EigenMethod::Auto;

  ModelConfig model;
  TrainConfig train;
  SyntheticParams synth;

  nlohmann::json to_json() const;
  /// Unknown keys and type mismatches are ConfigErrors. Missing keys keep
  /// their defaults.
  static RunConfig from_json(const nlohmann::json& j);
  /// Sets one key from its command-line text.
  void set(const std::string& key, const std::string& value);
  static const std::vector<std::string>& keys();
  static bool is_boolean(const std::string& key);

  /// Cross-field checks, including embedding_dim == lpe_dim.
  void validate() const;
};

RunConfig load_run_config(const std::string& path);

struct LoadedData {
  SparseGraph graph;
  SubgraphCatalog catalog;
  PairDataset pairs;
  CatalogReport catalog_report;
};

/// Reads graph, catalog and pairs named in `cfg` (restricting to the largest
/// component when use_lcc is set).
LoadedData load_data(const RunConfig& cfg, bool need_pairs = true);

/// node2vec M, LPE and GPE for the graph.
NodeEmbeddings build_embeddings(const SparseGraph& graph, const RunConfig& cfg);
EncodingBundle build_encodings(const SparseGraph& graph, const SubgraphCatalog& catalog,
                               const RunConfig& cfg, const DenseMatrix* embeddings = nullptr);

}  // namespace tspe
