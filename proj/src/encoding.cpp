#include "tspe/encoding.hpp"

#include <cmath>
#include <memory>

#include "tspe/error.hpp"
#include "tspe/kernels.hpp"

namespace tspe {

namespace {

struct LaplacianData {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> columns;
  std::vector<double> inv_sqrt_degree;
};

}  // namespace

SymmetricOperator normalized_laplacian(const SparseGraph& graph) {
  auto data = std::make_shared<LaplacianData>();
  data->offsets.assign(graph.offsets().begin(), graph.offsets().end());
  data->columns.assign(graph.adjacency().begin(), graph.adjacency().end());
  data->inv_sqrt_degree.resize(graph.num_nodes());
  for (NodeIndex v = 0; v < graph.num_nodes(); ++v) {
    const auto deg = static_cast<double>(graph.degree(v));
    data->inv_sqrt_degree[v] = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  SymmetricOperator op;
  op.n = graph.num_nodes();
  op.spectrum_upper_bound = 2.0;
  op.apply = [data](std::span<const double> x, std::span<double> y) {
    kernels::normalized_laplacian_apply(data->offsets, data->columns, data->inv_sqrt_degree, x, y);
  };
  return op;
}

std::size_t nontrivial_component_count(const SparseGraph& graph) {
  std::size_t count = 0;
  auto labels = component_labels(graph, &count);
  std::vector<char> has_edge(count, 0);
  for (NodeIndex v = 0; v < graph.num_nodes(); ++v) {
    if (graph.degree(v) > 0) has_edge[labels[v]] = 1;
  }
  std::size_t out = 0;
  for (char c : has_edge) out += static_cast<std::size_t>(c);
  return out;
}

LpeMatrix lpe(const SparseGraph& graph, const LpeOptions& options) {
  EigenOptions eo;
  eo.k = options.k;
  eo.tol = options.tol;
  eo.zero_threshold = options.zero_threshold;
  eo.seed = options.seed;
  eo.method = options.method;
  eo.expected_zero_modes = nontrivial_component_count(graph);
  EigenResult r = sym_eigs_smallest(normalized_laplacian(graph), eo);
  return LpeMatrix{std::move(r.vectors), std::move(r.values), r.zero_modes};
}

DenseMatrix build_weight_matrix(const SubgraphCatalog& catalog, std::size_t num_nodes) {
  DenseMatrix w(num_nodes, catalog.size());
  for (std::size_t j = 0; j < catalog.size(); ++j) {
    const auto& members = catalog[j].members;
    const double share = 1.0 / static_cast<double>(members.size());
    for (NodeIndex v : members) {
      if (v >= num_nodes) throw InvalidArgument("catalog member outside the graph");
      w(v, j) = share;
    }
  }
  return w;
}

std::string to_string(GeeAdjacency a) {
  switch (a) {
    case GeeAdjacency::Plain: return "adjacency";
    case GeeAdjacency::DiagonalAugmented: return "diagonal-augmented";
    case GeeAdjacency::LaplacianNormalized: return "laplacian";
  }
  return "adjacency";
}

GeeAdjacency parse_gee_adjacency(std::string_view s) {
  if (s == "adjacency") return GeeAdjacency::Plain;
  if (s == "diagonal-augmented") return GeeAdjacency::DiagonalAugmented;
  if (s == "laplacian") return GeeAdjacency::LaplacianNormalized;
  throw InvalidArgument("unknown GEE adjacency variant '" + std::string(s) + "'");
}

DenseMatrix gee_embed(const SparseGraph& graph, const DenseMatrix& weights,
                      GeeAdjacency variant) {
  if (weights.rows() != graph.num_nodes()) {
    throw InvalidArgument("gee_embed: W has " + std::to_string(weights.rows()) +
                          " rows, graph has " + std::to_string(graph.num_nodes()) + " nodes");
  }
  std::vector<double> entry_weights;
  if (variant == GeeAdjacency::LaplacianNormalized) {
    entry_weights.resize(graph.adjacency().size());
    for (NodeIndex u = 0; u < graph.num_nodes(); ++u) {
      const std::size_t base = graph.offsets()[u];
      auto nb = graph.neighbors(u);
      for (std::size_t e = 0; e < nb.size(); ++e) {
        entry_weights[base + e] =
            1.0 / std::sqrt(static_cast<double>(graph.degree(u) * graph.degree(nb[e])));
      }
    }
  }
  DenseMatrix z;
  kernels::csr_spmm<double>(graph.offsets(), graph.adjacency(), entry_weights, weights, z);
  if (variant == GeeAdjacency::DiagonalAugmented) {
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] += weights.data()[i];
  }
  return z;
}

GpeMatrix gpe(const DenseMatrix& z, std::size_t d, bool scale_by_sigma) {
  bool any = false;
  for (double v : z.storage()) any = any || v != 0.0;
  if (!any) throw NumericalError("gpe: degenerate input (Z = 0 has no positive singular values)");
  SvdResult s = thin_svd(z, d);
  GpeMatrix out{std::move(s.u), std::move(s.sigma)};
  if (scale_by_sigma) {
    for (std::size_t i = 0; i < out.vectors.rows(); ++i)
      for (std::size_t c = 0; c < d; ++c) out.vectors(i, c) *= out.singular_values[c];
  }
  return out;
}

DenseMatrix spe_compose(const DenseMatrix& m, const DenseMatrix& lpe_m, const DenseMatrix& gpe_m) {
  if (m.cols() != lpe_m.cols()) {
    throw InvalidArgument("spe_compose: M width " + std::to_string(m.cols()) +
                          " differs from LPE width " + std::to_string(lpe_m.cols()) +
                          "; M + LPE requires equal widths");
  }
  if (m.rows() != lpe_m.rows() || m.rows() != gpe_m.rows()) {
    throw InvalidArgument("spe_compose: row counts differ");
  }
  DenseMatrix e(m.rows(), m.cols() + gpe_m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j) + lpe_m(i, j);
    for (std::size_t j = 0; j < gpe_m.cols(); ++j) e(i, m.cols() + j) = gpe_m(i, j);
  }
  return e;
}

std::string to_string(PeMode m) {
  switch (m) {
    case PeMode::NoPE: return "nope";
    case PeMode::LPE: return "lpe";
    case PeMode::SPE: return "spe";
  }
  return "spe";
}

std::string to_display(PeMode m) {
  switch (m) {
    case PeMode::NoPE: return "NoPE";
    case PeMode::LPE: return "LPE";
    case PeMode::SPE: return "SPE";
  }
  return "SPE";
}

PeMode parse_pe_mode(std::string_view s) {
  if (s == "nope") return PeMode::NoPE;
  if (s == "lpe") return PeMode::LPE;
  if (s == "spe") return PeMode::SPE;
  throw InvalidArgument("unknown PE mode '" + std::string(s) + "' (expected nope|lpe|spe)");
}

std::size_t EncodingBundle::input_width(PeMode mode, std::size_t dim_m, std::size_t gpe_dim) {
  return mode == PeMode::SPE ? dim_m + gpe_dim : dim_m;
}

DenseMatrix EncodingBundle::input(PeMode mode, const std::vector<double>* lpe_signs) const {
  if (mode == PeMode::NoPE) return m;
  DenseMatrix l = lpe.vectors;
  if (lpe_signs) {
    for (std::size_t i = 0; i < l.rows(); ++i)
      for (std::size_t c = 0; c < l.cols(); ++c) l(i, c) *= (*lpe_signs)[c];
  }
  if (mode == PeMode::LPE) {
    DenseMatrix empty(m.rows(), 0);
    DenseMatrix e = spe_compose(m, l, empty);
    return e;
  }
  return spe_compose(m, l, gpe.vectors);
}

}  // namespace tspe
