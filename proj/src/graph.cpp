#include "tspe/graph.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "tspe/error.hpp"

namespace tspe {

namespace {

// Calls fn(line_number, fields) for every non-blank, non-comment line.
template <class Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string_view> fields;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') {
      if (end == text.size()) break;
      continue;
    }
    fields.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      fields.push_back(line.substr(i, j - i));
      i = j;
    }
    fn(line_no, fields);
    if (end == text.size()) break;
  }
}

double parse_real(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line_no, "unparseable score '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

SparseGraph SparseGraph::from_edges(std::vector<std::string> node_ids,
                                    std::span<const std::pair<NodeIndex, NodeIndex>> edges,
                                    std::size_t* self_loops_dropped,
                                    std::size_t* duplicates_dropped) {
  SparseGraph g;
  const std::size_t n = node_ids.size();
  g.node_ids_ = std::move(node_ids);
  g.index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!g.index_.emplace(g.node_ids_[i], static_cast<NodeIndex>(i)).second) {
      throw InvalidArgument("duplicate node id '" + g.node_ids_[i] + "'");
    }
  }

  std::vector<std::pair<NodeIndex, NodeIndex>> directed;
  directed.reserve(edges.size() * 2);
  std::size_t loops = 0;
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) throw InvalidArgument("edge endpoint out of range");
    if (u == v) {
      ++loops;
      continue;
    }
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  const std::size_t before = directed.size();
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  if (self_loops_dropped) *self_loops_dropped = loops;
  if (duplicates_dropped) *duplicates_dropped = (before - directed.size()) / 2;

  g.offsets_.assign(n + 1, 0);
  for (auto [u, v] : directed) ++g.offsets_[u + 1];
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  g.adjacency_.resize(directed.size());
  for (std::size_t e = 0; e < directed.size(); ++e) g.adjacency_[e] = directed[e].second;
  return g;
}

bool SparseGraph::has_edge(NodeIndex u, NodeIndex v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::optional<NodeIndex> SparseGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string SparseGraph::to_edge_list() const {
  // A self-loop line per node pins the dense order (and keeps isolated
  // nodes); the parser drops those lines. Then each edge once.
  std::ostringstream os;
  os << "# " << num_nodes() << " nodes, " << num_edges() << " edges\n";
  for (NodeIndex u = 0; u < num_nodes(); ++u) os << node_ids_[u] << '\t' << node_ids_[u] << '\n';
  for (NodeIndex u = 0; u < num_nodes(); ++u) {
    for (NodeIndex v : neighbors(u)) {
      if (v > u) os << node_ids_[u] << '\t' << node_ids_[v] << '\n';
    }
  }
  return os.str();
}

SparseGraph parse_edge_list(std::string_view text, EdgeListReport* report) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, NodeIndex> index;
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  std::size_t lines = 0;
  auto intern = [&](std::string_view id) {
    auto [it, inserted] = index.emplace(std::string(id), static_cast<NodeIndex>(ids.size()));
    if (inserted) ids.emplace_back(id);
    return it->second;
  };
  for_each_record(text, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
    if (f.size() != 2) {
      throw ParseError(line_no, "expected 2 fields, found " + std::to_string(f.size()));
    }
    ++lines;
    NodeIndex u = intern(f[0]);
    NodeIndex v = intern(f[1]);
    edges.emplace_back(u, v);
  });
  if (lines == 0) throw ParseError(0, "empty edge list");
  EdgeListReport r;
  r.lines = lines;
  SparseGraph g = SparseGraph::from_edges(std::move(ids), edges, &r.self_loops_dropped,
                                          &r.duplicates_dropped);
  if (report) *report = r;
  return g;
}

SubgraphCatalog::SubgraphCatalog(std::vector<Subgraph> subgraphs, std::size_t num_nodes)
    : subgraphs_(std::move(subgraphs)), num_nodes_(num_nodes) {
  for (std::size_t j = 0; j < subgraphs_.size(); ++j) {
    auto& members = subgraphs_[j].members;
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.empty()) {
      throw InvalidArgument("subgraph '" + subgraphs_[j].id + "' has no members");
    }
    if (members.back() >= num_nodes) {
      throw InvalidArgument("subgraph '" + subgraphs_[j].id + "' has a member out of range");
    }
    if (!index_.emplace(subgraphs_[j].id, j).second) {
      throw InvalidArgument("duplicate subgraph id '" + subgraphs_[j].id + "'");
    }
  }
}

std::optional<std::size_t> SubgraphCatalog::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string SubgraphCatalog::to_tsv(const SparseGraph& graph) const {
  std::ostringstream os;
  for (const auto& s : subgraphs_) {
    for (NodeIndex v : s.members) os << s.id << '\t' << graph.node_id(v) << '\n';
  }
  return os.str();
}

SubgraphCatalog parse_subgraph_catalog(std::string_view text, const SparseGraph& graph,
                                       CatalogReport* report, bool unknown_nodes_fatal) {
  std::vector<Subgraph> subgraphs;
  std::unordered_map<std::string, std::size_t> index;
  CatalogReport r;
  for_each_record(text, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
    if (f.size() != 2) {
      throw ParseError(line_no, "expected 2 fields, found " + std::to_string(f.size()));
    }
    ++r.lines;
    auto [it, inserted] = index.emplace(std::string(f[0]), subgraphs.size());
    if (inserted) subgraphs.push_back(Subgraph{std::string(f[0]), {}});
    auto node = graph.index_of(f[1]);
    if (!node) {
      if (unknown_nodes_fatal) {
        throw ParseError(line_no, "unknown node id '" + std::string(f[1]) + "'");
      }
      ++r.unknown_nodes_skipped;
      return;
    }
    subgraphs[it->second].members.push_back(*node);
  });
  for (const auto& s : subgraphs) {
    if (s.members.empty()) {
      throw InvalidArgument("subgraph '" + s.id + "' has zero resolvable members");
    }
  }
  if (report) *report = r;
  return SubgraphCatalog(std::move(subgraphs), graph.num_nodes());
}

std::string to_string(ThresholdMode m) { return m == ThresholdMode::RR0 ? "rr0" : "rr1"; }

ThresholdMode parse_threshold_mode(std::string_view s) {
  if (s == "rr0" || s == "RR0") return ThresholdMode::RR0;
  if (s == "rr1" || s == "RR1") return ThresholdMode::RR1;
  throw InvalidArgument("unknown threshold mode '" + std::string(s) + "' (expected rr0|rr1)");
}

std::vector<int> PairDataset::labels() const {
  std::vector<int> out(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) out[i] = label(i);
  return out;
}

double PairDataset::positive_fraction() const {
  if (records_.empty()) return 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < records_.size(); ++i) pos += static_cast<std::size_t>(label(i));
  return static_cast<double>(pos) / static_cast<double>(records_.size());
}

PairDataset PairDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<PairRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records_.at(i));
  return {std::move(out), mode_};
}

std::string PairDataset::to_tsv(const SubgraphCatalog& catalog) const {
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : records_) {
    os << catalog[r.subgraph_a].id << '\t' << catalog[r.subgraph_b].id << '\t' << r.raw_score
       << '\n';
  }
  return os.str();
}

PairDataset parse_pair_dataset(std::string_view text, const SubgraphCatalog& catalog,
                               ThresholdMode mode) {
  std::vector<PairRecord> records;
  for_each_record(text, [&](std::size_t line_no, const std::vector<std::string_view>& f) {
    if (f.size() != 3) {
      throw ParseError(line_no, "expected 3 fields, found " + std::to_string(f.size()));
    }
    auto a = catalog.index_of(f[0]);
    if (!a) throw ParseError(line_no, "unknown subgraph id '" + std::string(f[0]) + "'");
    auto b = catalog.index_of(f[1]);
    if (!b) throw ParseError(line_no, "unknown subgraph id '" + std::string(f[1]) + "'");
    if (*a == *b) throw ParseError(line_no, "self-pair '" + std::string(f[0]) + "'");
    records.push_back(PairRecord{*a, *b, parse_real(f[2], line_no)});
  });
  if (records.empty()) throw ParseError(0, "empty pair dataset");
  return {std::move(records), mode};
}

std::vector<NodeIndex> component_labels(const SparseGraph& graph, std::size_t* count) {
  const std::size_t n = graph.num_nodes();
  constexpr NodeIndex unset = static_cast<NodeIndex>(-1);
  std::vector<NodeIndex> label(n, unset);
  std::vector<NodeIndex> stack;
  NodeIndex next = 0;
  for (NodeIndex s = 0; s < n; ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeIndex u = stack.back();
      stack.pop_back();
      for (NodeIndex v : graph.neighbors(u)) {
        if (label[v] == unset) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

ComponentExtraction largest_connected_component(const SparseGraph& graph) {
  ComponentExtraction out;
  const std::size_t n = graph.num_nodes();
  if (n == 0) return out;
  std::size_t count = 0;
  auto label = component_labels(graph, &count);
  std::vector<std::size_t> sizes(count, 0);
  for (NodeIndex l : label) ++sizes[l];
  // Labels are assigned in order of smallest member, so the first maximum
  // is the component holding the smallest index among the tied ones.
  const auto best = static_cast<NodeIndex>(
      std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

  out.old_to_new.assign(n, -1);
  std::vector<std::string> ids;
  for (NodeIndex v = 0; v < n; ++v) {
    if (label[v] == best) {
      out.old_to_new[v] = static_cast<std::int64_t>(ids.size());
      ids.push_back(graph.node_id(v));
    }
  }
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  for (NodeIndex u = 0; u < n; ++u) {
    if (label[u] != best) continue;
    for (NodeIndex v : graph.neighbors(u)) {
      if (v > u) {
        edges.emplace_back(static_cast<NodeIndex>(out.old_to_new[u]),
                           static_cast<NodeIndex>(out.old_to_new[v]));
      }
    }
  }
  out.graph = SparseGraph::from_edges(std::move(ids), edges);
  return out;
}

}  // namespace tspe
