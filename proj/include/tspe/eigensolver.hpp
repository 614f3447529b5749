#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tspe/matrix.hpp"

namespace tspe {

/// Matrix-free symmetric n x n operator.
struct SymmetricOperator {
  std::size_t n = 0;
  std::function<void(std::span<const double> x, std::span<double> y)> apply;
  /// Known upper bound on the spectrum, if any. The iterative solver works on
  /// bound * I - op so that the wanted (smallest) eigenvalues become the
  /// largest ones.
  std::optional<double> spectrum_upper_bound;
};

/// Dense materialization by applying the operator to unit vectors.
DenseMatrix to_dense(const SymmetricOperator& op);

enum class EigenMethod { Auto, Dense, Lanczos };

struct EigenOptions {
  std::size_t k = 1;
  double tol = 1e-8;
  double zero_threshold = 1e-8;
  std::uint64_t seed = 0;
  EigenMethod method = EigenMethod::Auto;
  /// Auto switches to the iterative solver above this size.
  std::size_t dense_limit = 2000;
  /// Number of zero eigenvalues expected (e.g. component count); only a hint
  /// for sizing the iterative search.
  std::size_t expected_zero_modes = 0;
  std::size_t max_restarts = 5000;
};

struct EigenResult {
  std::vector<double> values;     // ascending, all > zero_threshold
  DenseMatrix vectors;            // n x k, orthonormal, sign-canonical columns
  std::vector<double> residuals;  // ||op u - lambda u||_2 per column
  std::size_t zero_modes = 0;     // zero eigenvalues skipped
};

/// The k smallest eigenpairs whose eigenvalue exceeds zero_threshold.
/// Within a repeated eigenvalue only the invariant subspace is determined;
/// individual vectors depend on the solver.
EigenResult sym_eigs_smallest(const SymmetricOperator& op, const EigenOptions& options);

struct SvdResult {
  DenseMatrix u;              // n x d
  std::vector<double> sigma;  // descending
  DenseMatrix v;              // K x d
};

/// Leading d singular triplets of z (one-sided Jacobi). U columns are
/// sign-canonical and V is flipped with them.
SvdResult thin_svd(const DenseMatrix& z, std::size_t d);

}  // namespace tspe
