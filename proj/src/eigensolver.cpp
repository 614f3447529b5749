#include "tspe/eigensolver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tspe/error.hpp"
#include "tspe/rng.hpp"

namespace tspe {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// Two passes of classical Gram-Schmidt against `basis`. Returns the
// accumulated coefficients.
Vec orthogonalize(Vec& w, const std::vector<Vec>& basis, std::size_t count) {
  Vec coef(count, 0.0);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < count; ++i) {
      const double h = dot(basis[i], w);
      axpy(-h, basis[i], w);
      coef[i] += h;
    }
  }
  return coef;
}

struct Shifted {
  const SymmetricOperator& op;
  double shift;
  mutable Vec tmp;
  // y = shift * x - op x
  void operator()(const Vec& x, Vec& y) const {
    op.apply(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = shift * x[i] - y[i];
  }
};

struct RitzPair {
  double theta;
  Vec vector;
};

class Lanczos {
 public:
  Lanczos(const Shifted& b, std::size_t n, double tol, std::uint64_t seed, std::size_t max_restarts)
      : b_(b), n_(n), tol_(tol), rng_(seed), max_restarts_(max_restarts) {}

  std::vector<RitzPair>& locked() { return locked_; }

  // Thick-restart Lanczos for the `want` largest eigenpairs of b restricted
  // to the orthogonal complement of the locked vectors. Converged pairs are
  // appended to the locked set.
  void run(std::size_t want) {
    const std::size_t free_dim = n_ - locked_.size();
    if (want == 0 || free_dim == 0) return;
    want = std::min(want, free_dim);
    const std::size_t m = std::min(free_dim, std::max(2 * want + 10, want + 24));

    std::vector<Vec> v(m, Vec(n_, 0.0));
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                              static_cast<Eigen::Index>(m));
    if (!random_start(v, 0)) return;

    std::size_t kept = 0;
    Vec w(n_);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart <= max_restarts_; ++restart) {
      std::size_t size = m;
      double beta = 0.0;
      for (std::size_t j = kept; j < m; ++j) {
        b_(v[j], w);
        deflate(w);
        Vec coef = orthogonalize(w, v, j + 1);
        for (std::size_t i = 0; i <= j; ++i) {
          h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = coef[i];
          h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = coef[i];
        }
        beta = norm(w);
        if (j + 1 == m) break;
        if (beta <= 1e-12 * std::max(1.0, std::abs(coef[j]))) {
          // Invariant subspace reached: continue with a fresh direction.
          beta = 0.0;
          if (!random_start(v, j + 1)) {
            size = j + 1;
            break;
          }
        } else {
          for (std::size_t i = 0; i < n_; ++i) v[j + 1][i] = w[i] / beta;
        }
      }

      const auto sz = static_cast<Eigen::Index>(size);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.topLeftCorner(sz, sz));
      const Eigen::VectorXd& theta = es.eigenvalues();  // ascending
      const Eigen::MatrixXd& y = es.eigenvectors();
      const std::size_t got = std::min(want, size);

      bool converged = true;
      double worst = 0.0;
      for (std::size_t r = 0; r < got; ++r) {
        const Eigen::Index c = sz - 1 - static_cast<Eigen::Index>(r);
        const double res = std::abs(beta * y(sz - 1, c));
        worst = std::max(worst, res);
        if (res > tol_) converged = false;
      }
      best = std::min(best, worst);
      if (converged || size < m) {
        for (std::size_t r = 0; r < got; ++r) {
          const Eigen::Index c = sz - 1 - static_cast<Eigen::Index>(r);
          locked_.push_back({theta(c), combine(v, y, c, size)});
        }
        return;
      }

      // Thick restart: keep the leading Ritz vectors plus the residual.
      kept = std::min(want + (m - want) / 2, m - 1);
      std::vector<Vec> nv(m, Vec(n_, 0.0));
      for (std::size_t r = 0; r < kept; ++r) {
        nv[r] = combine(v, y, sz - 1 - static_cast<Eigen::Index>(r), size);
      }
      for (std::size_t i = 0; i < n_; ++i) nv[kept][i] = w[i] / beta;
      v.swap(nv);
      h.setZero();
      for (std::size_t r = 0; r < kept; ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        h(ri, ri) = theta(sz - 1 - ri);
      }
    }
    throw ConvergenceError("Lanczos did not converge within the restart budget", best);
  }

 private:
  Vec combine(const std::vector<Vec>& v, const Eigen::MatrixXd& y, Eigen::Index col,
              std::size_t size) const {
    Vec out(n_, 0.0);
    for (std::size_t i = 0; i < size; ++i) {
      axpy(y(static_cast<Eigen::Index>(i), col), v[i], out);
    }
    const double nr = norm(out);
    for (double& x : out) x /= nr;
    return out;
  }

  void deflate(Vec& w) const {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& p : locked_) axpy(-dot(p.vector, w), p.vector, w);
  }

  // Fills v[slot] with a random unit vector orthogonal to the locked set and
  // v[0..slot). Fails when those already span the space.
  bool random_start(std::vector<Vec>& v, std::size_t slot) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vec x(n_);
      for (double& e : x) e = rng_.uniform(-1.0, 1.0);
      const double before = norm(x);
      deflate(x);
      orthogonalize(x, v, slot);
      const double after = norm(x);
      if (after > 1e-8 * before) {
        for (std::size_t i = 0; i < n_; ++i) v[slot][i] = x[i] / after;
        return true;
      }
    }
    return false;
  }

  const Shifted& b_;
  std::size_t n_;
  double tol_;
  Rng rng_;
  std::size_t max_restarts_;
  std::vector<RitzPair> locked_;
};

EigenResult finish(const SymmetricOperator& op, std::vector<double> lambdas,
                   std::vector<Vec> vectors, std::size_t zero_modes, double tol) {
  EigenResult out;
  const std::size_t k = lambdas.size();
  out.values = std::move(lambdas);
  out.vectors = DenseMatrix(op.n, k);
  out.zero_modes = zero_modes;
  Vec y(op.n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < op.n; ++i) out.vectors(i, c) = vectors[c][i];
    canonicalize_column_sign(out.vectors, c);
    op.apply(vectors[c], y);
    double r = 0.0;
    for (std::size_t i = 0; i < op.n; ++i) {
      const double d = y[i] - out.values[c] * vectors[c][i];
      r += d * d;
    }
    out.residuals.push_back(std::sqrt(r));
  }
  double worst = 0.0;
  for (double r : out.residuals) worst = std::max(worst, r);
  if (worst > tol) throw ConvergenceError("eigenpair residual above tolerance", worst);
  return out;
}

EigenResult dense_path(const SymmetricOperator& op, const EigenOptions& opt) {
  DenseMatrix a = to_dense(op);
  const auto n = static_cast<Eigen::Index>(op.n);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = 0.5 * (a(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) +
                       a(static_cast<std::size_t>(j), static_cast<std::size_t>(i)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", NAN);
  std::vector<double> values;
  std::vector<Vec> vectors;
  std::size_t zeros = 0;
  for (Eigen::Index c = 0; c < n && values.size() < opt.k; ++c) {
    const double lambda = es.eigenvalues()(c);
    if (lambda <= opt.zero_threshold) {
      ++zeros;
      continue;
    }
    values.push_back(lambda);
    Vec u(op.n);
    for (Eigen::Index i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = es.eigenvectors()(i, c);
    vectors.push_back(std::move(u));
  }
  if (values.size() < opt.k) {
    throw InvalidArgument("k = " + std::to_string(opt.k) + " exceeds the " +
                          std::to_string(values.size()) + " eigenvalues above zero_threshold");
  }
  return finish(op, std::move(values), std::move(vectors), zeros, std::max(opt.tol, 1e-10));
}

EigenResult lanczos_path(const SymmetricOperator& op, const EigenOptions& opt) {
  const double shift = op.spectrum_upper_bound.value_or(0.0);
  Shifted b{op, shift, {}};
  // Ritz residuals are tracked on the shifted operator; keep some headroom
  // so the final check on op itself passes.
  Lanczos lz(b, op.n, 0.1 * opt.tol, derive_seed(opt.seed, "lanczos"), opt.max_restarts);
  auto& locked = lz.locked();

  std::size_t want = std::min(op.n, opt.k + opt.expected_zero_modes);
  lz.run(want);
  for (;;) {
    std::sort(locked.begin(), locked.end(),
              [](const RitzPair& a, const RitzPair& b) { return a.theta > b.theta; });
    // Look for a pair missed by the previous runs (e.g. a second copy of a
    // repeated eigenvalue) that belongs among the wanted ones.
    const std::size_t before = locked.size();
    const double floor_theta = locked.empty() ? -INFINITY : locked[std::min(want, before) - 1].theta;
    lz.run(1);
    if (locked.size() > before) {
      const double found = locked.back().theta;
      if (found > floor_theta + opt.tol) continue;
      locked.pop_back();
    }
    std::size_t zeros = 0;
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < std::min(want, locked.size()); ++i) {
      (shift - locked[i].theta <= opt.zero_threshold ? zeros : nonzero) += 1;
    }
    if (nonzero >= opt.k) break;
    if (locked.size() >= op.n || want >= op.n) {
      throw InvalidArgument("k = " + std::to_string(opt.k) + " exceeds the " +
                            std::to_string(nonzero) + " eigenvalues above zero_threshold");
    }
    const std::size_t more = opt.k - nonzero;
    want = std::min(op.n, want + more);
    lz.run(want - std::min(want, locked.size()));
  }

  std::vector<double> values;
  std::vector<Vec> vectors;
  std::size_t zeros = 0;
  for (const auto& p : locked) {
    if (values.size() == opt.k) break;
    const double lambda = shift - p.theta;
    if (lambda <= opt.zero_threshold) {
      ++zeros;
      continue;
    }
    values.push_back(lambda);
    vectors.push_back(p.vector);
  }
  return finish(op, std::move(values), std::move(vectors), zeros, opt.tol);
}

}  // namespace

DenseMatrix to_dense(const SymmetricOperator& op) {
  DenseMatrix a(op.n, op.n);
  Vec e(op.n, 0.0), y(op.n);
  for (std::size_t j = 0; j < op.n; ++j) {
    e[j] = 1.0;
    op.apply(e, y);
    e[j] = 0.0;
    for (std::size_t i = 0; i < op.n; ++i) a(i, j) = y[i];
  }
  return a;
}

EigenResult sym_eigs_smallest(const SymmetricOperator& op, const EigenOptions& opt) {
  if (opt.k == 0 || opt.k > op.n) {
    throw InvalidArgument("k must lie in [1, n]; got k = " + std::to_string(opt.k));
  }
  if (!(opt.tol > 0.0)) throw InvalidArgument("tol must be positive");
  const bool dense = opt.method == EigenMethod::Dense ||
                     (opt.method == EigenMethod::Auto && op.n <= opt.dense_limit);
  return dense ? dense_path(op, opt) : lanczos_path(op, opt);
}

}  // namespace tspe
