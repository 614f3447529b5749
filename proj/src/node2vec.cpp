#include "tspe/node2vec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tspe/error.hpp"
#include "tspe/rng.hpp"

namespace tspe {

void WalkConfig::validate() const {
  if (!(p > 0.0) || !(q > 0.0)) throw InvalidArgument("walk p and q must be positive");
  if (walk_length < 2) throw InvalidArgument("walk_length must be >= 2");
  if (walks_per_node < 1) throw InvalidArgument("walks_per_node must be >= 1");
}

void SkipGramConfig::validate() const {
  if (dim < 1) throw InvalidArgument("embedding dim must be >= 1");
  if (window < 1) throw InvalidArgument("window must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be >= 0");
}

namespace {

Walk walk_from(const SparseGraph& g, NodeIndex start, const WalkConfig& cfg, Rng& rng,
               std::vector<double>& weights) {
  Walk walk;
  walk.reserve(cfg.walk_length);
  walk.push_back(start);
  const bool uniform = cfg.p == 1.0 && cfg.q == 1.0;
  while (walk.size() < cfg.walk_length) {
    const NodeIndex cur = walk.back();
    auto nb = g.neighbors(cur);
    if (nb.empty()) break;
    if (walk.size() == 1 || uniform) {
      walk.push_back(nb[rng.below(nb.size())]);
      continue;
    }
    const NodeIndex prev = walk[walk.size() - 2];
    weights.resize(nb.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const NodeIndex x = nb[i];
      double w;
      if (x == prev) {
        w = 1.0 / cfg.p;
      } else if (g.has_edge(x, prev)) {
        w = 1.0;
      } else {
        w = 1.0 / cfg.q;
      }
      weights[i] = w;
      total += w;
    }
    double r = rng.uniform() * total;
    std::size_t pick = nb.size() - 1;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      r -= weights[i];
      if (r < 0.0) {
        pick = i;
        break;
      }
    }
    walk.push_back(nb[pick]);
  }
  return walk;
}

}  // namespace

std::vector<Walk> generate_walks(const SparseGraph& graph, const WalkConfig& cfg) {
  cfg.validate();
  const std::size_t n = graph.num_nodes();
  std::vector<Walk> walks(n * cfg.walks_per_node);
  for (std::size_t round = 0; round < cfg.walks_per_node; ++round) {
    const std::uint64_t round_seed = derive_seed(cfg.seed, round);
    std::vector<NodeIndex> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeIndex>(i);
    Rng perm(derive_seed(round_seed, "order"));
    perm.shuffle(order);
#pragma omp parallel
    {
      std::vector<double> weights;
#pragma omp for schedule(dynamic, 64)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        Rng rng(derive_seed(round_seed, static_cast<std::uint64_t>(idx)));
        walks[round * n + idx] = walk_from(graph, order[idx], cfg, rng, weights);
      }
    }
  }
  return walks;
}

namespace {

// Four independent partial sums so the reduction pipelines.
double dot_product(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t d = 0;
  for (; d + 4 <= n; d += 4) {
    s0 += a[d] * b[d];
    s1 += a[d + 1] * b[d + 1];
    s2 += a[d + 2] * b[d + 2];
    s3 += a[d + 3] * b[d + 3];
  }
  for (; d < n; ++d) s0 += a[d] * b[d];
  return (s0 + s1) + (s2 + s3);
}

// Cumulative unigram^0.75 distribution for noise sampling.
std::vector<double> noise_cdf(const std::vector<Walk>& walks, std::size_t num_nodes) {
  std::vector<double> counts(num_nodes, 0.0);
  for (const auto& w : walks)
    for (NodeIndex v : w) counts[v] += 1.0;
  double total = 0.0;
  for (double& c : counts) {
    c = std::pow(c, 0.75);
    total += c;
  }
  double acc = 0.0;
  for (double& c : counts) {
    acc += c / total;
    c = acc;
  }
  if (!counts.empty()) counts.back() = 1.0;
  return counts;
}

}  // namespace

NodeEmbeddings train_skipgram(const std::vector<Walk>& walks, const SkipGramConfig& cfg,
                              std::size_t num_nodes, const EpochObserver& observer) {
  cfg.validate();
  if (walks.empty()) throw InvalidArgument("train_skipgram: no walks");
  for (const auto& w : walks)
    for (NodeIndex v : w)
      if (v >= num_nodes) {
        throw InvalidArgument("train_skipgram: node index " + std::to_string(v) +
                              " out of range");
      }

  const std::size_t dim = cfg.dim;
  Rng rng(derive_seed(cfg.seed, "skipgram"));
  NodeEmbeddings out;
  out.matrix = DenseMatrix(num_nodes, dim);
  const double bound = 0.5 / static_cast<double>(dim);
  for (double& v : out.matrix.storage()) v = rng.uniform(-bound, bound);
  DenseMatrix context(num_nodes, dim);  // output vectors start at zero

  const auto cdf = noise_cdf(walks, num_nodes);
  auto sample_noise = [&]() {
    const double u = rng.uniform();
    return static_cast<NodeIndex>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  std::size_t tokens = 0;
  for (const auto& w : walks) tokens += w.size();
  const double total_work = static_cast<double>(tokens * std::max<std::size_t>(cfg.epochs, 1));
  double processed = 0.0;

  std::vector<double> grad(dim);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t terms = 0;
    for (const auto& walk : walks) {
      for (std::size_t pos = 0; pos < walk.size(); ++pos) {
        const double lr =
            cfg.learning_rate * std::max(1e-4, 1.0 - processed / total_work);
        processed += 1.0;
        const NodeIndex center = walk[pos];
        auto in = out.matrix.row(center);
        const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, pos + cfg.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          const NodeIndex target = walk[c];
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t s = 0; s <= cfg.negative_samples; ++s) {
            NodeIndex other;
            double label;
            if (s == 0) {
              other = target;
              label = 1.0;
            } else {
              other = sample_noise();
              if (other == target) continue;
              label = 0.0;
            }
            auto ctx = context.row(other);
            const double dot = dot_product(in.data(), ctx.data(), dim);
            // One exp serves both the loss and the sigmoid.
            const double e = std::exp(-std::abs(dot));
            const double log1pe = std::log1p(e);
            const double sig = dot >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
            // -log sigmoid(+-dot) = softplus(-+dot)
            const double z = label > 0 ? -dot : dot;
            loss += (z > 0 ? z : 0.0) + log1pe;
            ++terms;
            const double g = lr * (label - sig);
            for (std::size_t d = 0; d < dim; ++d) {
              grad[d] += g * ctx[d];
              ctx[d] += g * in[d];
            }
          }
          for (std::size_t d = 0; d < dim; ++d) in[d] += grad[d];
        }
      }
    }
    out.epoch_loss.push_back(terms ? loss / static_cast<double>(terms) : 0.0);
    if (observer) observer(epoch, out.matrix);
  }
  return out;
}

}  // namespace tspe
