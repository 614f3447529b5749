#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tspe/eigensolver.hpp"
#include "tspe/error.hpp"

namespace tspe {

namespace {

using Vec = std::vector<double>;

// One-sided Jacobi on the columns of a (m x n, m >= n). On return the
// columns of a are mutually orthogonal and v holds the accumulated rotations.
void hestenes(std::vector<Vec>& a, std::vector<Vec>& v) {
  const std::size_t n = a.size();
  const std::size_t m = n ? a[0].size() : 0;
  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 80;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        const Vec& ap = a[p];
        const Vec& aq = a[q];
        for (std::size_t i = 0; i < m; ++i) {
          alpha += ap[i] * ap[i];
          beta += aq[i] * aq[i];
          gamma += ap[i] * aq[i];
        }
        if (std::abs(gamma) <= eps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = a[p][i], y = a[q][i];
          a[p][i] = c * x - s * y;
          a[q][i] = s * x + c * y;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double x = v[p][i], y = v[q][i];
          v[p][i] = c * x - s * y;
          v[q][i] = s * x + c * y;
        }
      }
    }
    if (!rotated) return;
  }
}

// Completes `cols` to an orthonormal set by Gram-Schmidt over unit vectors.
void complete_basis(std::vector<Vec>& cols, std::size_t from, std::size_t dim) {
  std::size_t next_unit = 0;
  for (std::size_t c = from; c < cols.size(); ++c) {
    for (; next_unit < dim; ++next_unit) {
      Vec x(dim, 0.0);
      x[next_unit] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < c; ++j) {
          double h = 0;
          for (std::size_t i = 0; i < dim; ++i) h += cols[j][i] * x[i];
          for (std::size_t i = 0; i < dim; ++i) x[i] -= h * cols[j][i];
        }
      }
      double nr = 0;
      for (double e : x) nr += e * e;
      nr = std::sqrt(nr);
      if (nr > 1e-6) {
        for (double& e : x) e /= nr;
        cols[c] = std::move(x);
        ++next_unit;
        break;
      }
    }
  }
}

}  // namespace

SvdResult thin_svd(const DenseMatrix& z, std::size_t d) {
  const std::size_t rows = z.rows();
  const std::size_t cols = z.cols();
  if (d == 0 || d > std::min(rows, cols)) {
    throw InvalidArgument("thin_svd: d = " + std::to_string(d) + " must lie in [1, " +
                          std::to_string(std::min(rows, cols)) + "]");
  }
  if (!z.all_finite()) throw NumericalError("thin_svd: non-finite input");

  // Orthogonalize the columns of the taller orientation.
  const bool flip = rows < cols;
  const std::size_t m = flip ? cols : rows;
  const std::size_t n = flip ? rows : cols;
  std::vector<Vec> a(n, Vec(m));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) (flip ? a[i][j] : a[j][i]) = z(i, j);
  std::vector<Vec> v(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  hestenes(a, v);

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0;
    for (double e : a[j]) s += e * e;
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  // Left vectors of the tall orientation are the normalized columns; right
  // vectors are the rotation columns.
  const double cutoff = std::max(sigma[order[0]], 1.0) * 1e-13 * static_cast<double>(m);
  std::vector<Vec> left(d), right(d);
  std::size_t rank = 0;
  SvdResult out;
  for (std::size_t r = 0; r < d; ++r) {
    const std::size_t j = order[r];
    out.sigma.push_back(sigma[j]);
    right[r] = v[j];
    if (sigma[j] > cutoff) {
      left[r] = a[j];
      for (double& e : left[r]) e /= sigma[j];
      rank = r + 1;
    }
  }
  if (rank < d) {
    for (std::size_t r = rank; r < d; ++r) out.sigma[r] = std::max(0.0, out.sigma[r]);
    complete_basis(left, rank, m);
  }

  const std::vector<Vec>& us = flip ? right : left;
  const std::vector<Vec>& vs = flip ? left : right;
  out.u = DenseMatrix(rows, d);
  out.v = DenseMatrix(cols, d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t i = 0; i < rows; ++i) out.u(i, r) = us[r][i];
    for (std::size_t i = 0; i < cols; ++i) out.v(i, r) = vs[r][i];
    if (canonicalize_column_sign(out.u, r)) {
      for (std::size_t i = 0; i < cols; ++i) out.v(i, r) = -out.v(i, r);
    }
  }
  return out;
}

}  // namespace tspe
