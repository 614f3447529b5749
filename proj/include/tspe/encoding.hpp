#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tspe/eigensolver.hpp"
#include "tspe/graph.hpp"
#include "tspe/matrix.hpp"

namespace tspe {

/// x -> x - D^{-1/2} A D^{-1/2} x, with D^{-1/2}_ii = 0 for isolated nodes.
/// The operator owns a copy of the adjacency.
SymmetricOperator normalized_laplacian(const SparseGraph& graph);

/// Connected components that contain at least one edge; these are exactly
/// the zero modes of the normalized Laplacian.
std::size_t nontrivial_component_count(const SparseGraph& graph);

struct LpeOptions {
  std::size_t k = 64;
  double tol = 1e-8;
  double zero_threshold = 1e-8;
  std::uint64_t seed = 1;
  EigenMethod method = EigenMethod::Auto;
};

struct LpeMatrix {
  DenseMatrix vectors;               // N x k
  std::vector<double> eigenvalues;   // ascending, nonzero
  std::size_t zero_modes = 0;
};

/// Eigenvectors of the normalized Laplacian for the k smallest nonzero
/// eigenvalues.
LpeMatrix lpe(const SparseGraph& graph, const LpeOptions& options);

/// W[i][j] = 1/n_j if node i belongs to subgraph j, else 0.
DenseMatrix build_weight_matrix(const SubgraphCatalog& catalog, std::size_t num_nodes);

enum class GeeAdjacency { Plain, DiagonalAugmented, LaplacianNormalized };
std::string to_string(GeeAdjacency a);
GeeAdjacency parse_gee_adjacency(std::string_view s);

/// Z = A W for the chosen adjacency variant (plain A by default).
DenseMatrix gee_embed(const SparseGraph& graph, const DenseMatrix& weights,
                      GeeAdjacency variant = GeeAdjacency::Plain);

struct GpeMatrix {
  DenseMatrix vectors;                  // N x d
  std::vector<double> singular_values;  // descending
};

/// Leading d left singular vectors of Z, unscaled unless scale_by_sigma.
GpeMatrix gpe(const DenseMatrix& z, std::size_t d, bool scale_by_sigma = false);

/// E = [M + LPE, GPE].
DenseMatrix spe_compose(const DenseMatrix& m, const DenseMatrix& lpe, const DenseMatrix& gpe);

enum class PeMode { NoPE, LPE, SPE };
std::string to_string(PeMode m);
/// "NoPE", "LPE", "SPE" as used in report headers.
std::string to_display(PeMode m);
PeMode parse_pe_mode(std::string_view s);

/// Node-level matrices feeding the transformer.
struct EncodingBundle {
  DenseMatrix m;
  LpeMatrix lpe;
  GpeMatrix gpe;

  /// NoPE: M. LPE: M + LPE. SPE: [M + LPE, GPE]. `lpe_signs`, when given,
  /// multiplies LPE column c by lpe_signs[c].
  DenseMatrix input(PeMode mode, const std::vector<double>* lpe_signs = nullptr) const;
  static std::size_t input_width(PeMode mode, std::size_t dim_m, std::size_t gpe_dim);
};

}  // namespace tspe
