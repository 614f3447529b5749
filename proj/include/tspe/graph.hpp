#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tspe {

using NodeIndex = std::uint32_t;

/// Immutable simple undirected graph in CSR form. Dense indices follow the
/// first-appearance order of the external ids.
class SparseGraph {
 public:
  SparseGraph() = default;

  /// Builds the graph from dense endpoint pairs. Self-loops are dropped and
  /// parallel edges collapsed; the counts are reported through the out-params.
  static SparseGraph from_edges(std::vector<std::string> node_ids,
                                std::span<const std::pair<NodeIndex, NodeIndex>> edges,
                                std::size_t* self_loops_dropped = nullptr,
                                std::size_t* duplicates_dropped = nullptr);

  std::size_t num_nodes() const noexcept { return node_ids_.size(); }
  std::size_t num_edges() const noexcept { return adjacency_.size() / 2; }
  bool empty() const noexcept { return node_ids_.empty(); }

  std::span<const NodeIndex> neighbors(NodeIndex v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeIndex v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeIndex u, NodeIndex v) const;

  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const NodeIndex> adjacency() const noexcept { return adjacency_; }

  const std::string& node_id(NodeIndex v) const { return node_ids_[v]; }
  const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }
  std::optional<NodeIndex> index_of(std::string_view id) const;

  /// Edge-list text that parses back to an identical graph. Every node is
  /// first listed as a self-loop line (dropped on parse) so dense indices and
  /// isolated nodes survive the round trip.
  std::string to_edge_list() const;

  friend bool operator==(const SparseGraph& a, const SparseGraph& b) {
    return a.node_ids_ == b.node_ids_ && a.offsets_ == b.offsets_ &&
           a.adjacency_ == b.adjacency_;
  }

 private:
  std::vector<std::string> node_ids_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeIndex> adjacency_;  // sorted within each row
};

struct EdgeListReport {
  std::size_t lines = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
};

SparseGraph parse_edge_list(std::string_view text, EdgeListReport* report = nullptr);

struct Subgraph {
  std::string id;
  std::vector<NodeIndex> members;  // sorted, unique
};

class SubgraphCatalog {
 public:
  SubgraphCatalog() = default;
  SubgraphCatalog(std::vector<Subgraph> subgraphs, std::size_t num_nodes);

  std::size_t size() const noexcept { return subgraphs_.size(); }
  std::size_t num_nodes() const noexcept { return num_nodes_; }
  const Subgraph& operator[](std::size_t j) const { return subgraphs_[j]; }
  const std::vector<Subgraph>& subgraphs() const noexcept { return subgraphs_; }
  std::optional<std::size_t> index_of(std::string_view id) const;

  std::string to_tsv(const SparseGraph& graph) const;

 private:
  std::vector<Subgraph> subgraphs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t num_nodes_ = 0;
};

struct CatalogReport {
  std::size_t lines = 0;
  std::size_t unknown_nodes_skipped = 0;
};

SubgraphCatalog parse_subgraph_catalog(std::string_view text, const SparseGraph& graph,
                                       CatalogReport* report = nullptr,
                                       bool unknown_nodes_fatal = false);

enum class ThresholdMode { RR0, RR1 };

/// Label rule: positive iff raw_score is strictly greater than the threshold.
inline double threshold_of(ThresholdMode m) { return m == ThresholdMode::RR0 ? 0.0 : 1.0; }
inline int label_for(double raw_score, ThresholdMode m) { return raw_score > threshold_of(m) ? 1 : 0; }
std::string to_string(ThresholdMode m);
ThresholdMode parse_threshold_mode(std::string_view s);

struct PairRecord {
  std::size_t subgraph_a = 0;  // catalog index
  std::size_t subgraph_b = 0;
  double raw_score = 0.0;
};

/// Pairs plus the active threshold mode. Labels are derived, never stored.
class PairDataset {
 public:
  PairDataset() = default;
  PairDataset(std::vector<PairRecord> records, ThresholdMode mode)
      : records_(std::move(records)), mode_(mode) {}

  std::size_t size() const noexcept { return records_.size(); }
  const PairRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<PairRecord>& records() const noexcept { return records_; }
  ThresholdMode mode() const noexcept { return mode_; }
  int label(std::size_t i) const { return label_for(records_[i].raw_score, mode_); }
  std::vector<int> labels() const;
  double positive_fraction() const;

  PairDataset relabeled(ThresholdMode mode) const { return {records_, mode}; }
  PairDataset subset(std::span<const std::size_t> indices) const;

  std::string to_tsv(const SubgraphCatalog& catalog) const;

 private:
  std::vector<PairRecord> records_;
  ThresholdMode mode_ = ThresholdMode::RR0;
};

PairDataset parse_pair_dataset(std::string_view text, const SubgraphCatalog& catalog,
                               ThresholdMode mode);

/// Component label per node (labels numbered in order of smallest member).
std::vector<NodeIndex> component_labels(const SparseGraph& graph, std::size_t* count = nullptr);

struct ComponentExtraction {
  SparseGraph graph;
  std::vector<std::int64_t> old_to_new;  // -1 for dropped nodes
};

/// Induced subgraph on the largest connected component. Ties go to the
/// component containing the smallest dense index.
ComponentExtraction largest_connected_component(const SparseGraph& graph);

struct SyntheticParams {
  std::size_t num_nodes = 500;
  std::size_t num_subgraphs = 30;
  std::size_t module_size = 15;
  double overlap_fraction = 0.6;
  double p_in = 0.3;
  double p_bg = 0.01;
  std::size_t num_pairs = 120;
  std::uint64_t seed = 1;
};

struct SyntheticDataset {
  SparseGraph graph;
  SubgraphCatalog catalog;
  PairDataset pairs;
  std::vector<std::size_t> family;  // planted family per subgraph
};

/// Planted-signal generator. Subgraphs are grouped into families; each
/// non-root member is a copy of `overlap_fraction` of its root's nodes plus
/// fresh nodes. Same-family pairs are positive, cross-family pairs negative.
SyntheticDataset generate_synthetic(const SyntheticParams& params);

}  // namespace tspe
