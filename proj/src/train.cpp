#include "tspe/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tspe/error.hpp"

namespace tspe {

void TrainConfig::validate() const {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw InvalidArgument("valid_fraction must lie in (0, 1)");
  }
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be >= 0");
}

template <class T>
Matrix<T> gather_tokens(const Matrix<T>& inputs, const Subgraph& subgraph) {
  if (subgraph.members.empty()) {
    throw InvalidArgument("subgraph '" + subgraph.id + "' is empty");
  }
  Matrix<T> out(subgraph.members.size(), inputs.cols());
  for (std::size_t r = 0; r < subgraph.members.size(); ++r) {
    auto src = inputs.row(subgraph.members[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

template <class T>
std::vector<PairBatch<T>> make_batches(const PairDataset& pairs, std::span<const std::size_t> indices,
                                       const Matrix<T>& inputs, const SubgraphCatalog& catalog,
                                       std::size_t batch_size,
                                       std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<PairBatch<T>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Matrix<T>> a, b;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      const PairRecord& r = pairs[order[i]];
      a.push_back(gather_tokens(inputs, catalog[r.subgraph_a]));
      b.push_back(gather_tokens(inputs, catalog[r.subgraph_b]));
      labels.push_back(pairs.label(order[i]));
    }
    auto batch = PairBatch<T>::from_pairs(a, b, std::move(labels));
    batch.pair_index.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(batch));
  }
  return out;
}

template <class T>
void Adam<T>::step(std::vector<ad::Parameter<T>>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.grad.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    auto& val = p.value.storage();
    const auto& g = p.grad.storage();
    for (std::size_t j = 0; j < val.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      const double update = lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      val[j] = static_cast<T>(static_cast<double>(val[j]) - update);
    }
  }
}

template <class T>
double train_step(TransformerModel<T>& model, Adam<T>& optimizer, const PairBatch<T>& batch,
                  Rng* dropout_rng) {
  for (auto& p : model.parameters()) p.zero_grad();
  ad::Tape<T> tape;
  auto f = model.forward(tape, batch, dropout_rng);
  ad::Var loss = ad::bce_with_logits(tape, f.logits, batch.labels);
  // Loss value from the logits in double, matching bce_loss exactly.
  const auto& z = tape.value(f.logits).storage();
  std::vector<double> zd(z.begin(), z.end());
  const double value = bce_loss(zd, batch.labels);
  tape.backward(loss);
  optimizer.step(model.parameters());
  return value;
}

template <class T>
double evaluate_loss(TransformerModel<T>& model, const std::vector<PairBatch<T>>& batches) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    auto z = model.logits(b);
    std::vector<double> zd(z.begin(), z.end());
    total += bce_loss(zd, b.labels) * static_cast<double>(b.batch);
    count += b.batch;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const PairDataset& pairs, std::span<const std::size_t> indices, double fraction,
    std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i : indices) by_class[pairs.label(i)].push_back(i);
  std::vector<std::size_t> train, valid;
  Rng rng(seed);
  for (auto& cls : by_class) {
    rng.shuffle(cls);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cls.size())));
    if (take == 0 && cls.size() > 1) take = 1;
    if (take >= cls.size() && !cls.empty()) take = cls.size() - 1;
    valid.insert(valid.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(take));
    train.insert(train.end(), cls.begin() + static_cast<std::ptrdiff_t>(take), cls.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());
  return {std::move(train), std::move(valid)};
}

TrainResult train(TransformerModel<float> model, const PairDataset& pairs,
                  std::span<const std::size_t> indices, const InputSource& input,
                  const SubgraphCatalog& catalog, const TrainConfig& cfg) {
  cfg.validate();
  if (input.bundle == nullptr) throw InvalidArgument("train: no encodings supplied");
  if (indices.size() < cfg.batch_size) {
    throw InvalidArgument("train: " + std::to_string(indices.size()) +
                          " pairs is fewer than batch_size " + std::to_string(cfg.batch_size));
  }
  TrainResult result;
  std::tie(result.train_indices, result.valid_indices) =
      stratified_holdout(pairs, indices, cfg.valid_fraction, derive_seed(cfg.seed, "holdout"));

  const bool flip = model.config().lpe_sign_flip && input.mode != PeMode::NoPE;
  Matrix<float> inputs = input.bundle->input(input.mode).cast<float>();
  const Matrix<float> fixed_inputs = inputs;
  const auto valid_batches =
      make_batches(pairs, result.valid_indices, fixed_inputs, catalog, cfg.batch_size, std::nullopt);

  Adam<float> adam(cfg.learning_rate);
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  Rng flip_rng(derive_seed(cfg.seed, "lpe-sign"));
  result.model = model;
  result.best_valid_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (flip) {
      std::vector<double> signs(input.bundle->lpe.vectors.cols());
      for (double& s : signs) s = flip_rng.bernoulli(0.5) ? -1.0 : 1.0;
      inputs = input.bundle->input(input.mode, &signs).cast<float>();
    }
    auto batches = make_batches(pairs, result.train_indices, inputs, catalog, cfg.batch_size,
                                derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      double loss;
      try {
        loss = train_step(model, adam, batches[bi], &dropout_rng);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) +
                             ": " + e.what());
      }
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(bi));
      }
      total += loss * static_cast<double>(batches[bi].batch);
      count += batches[bi].batch;
    }
    EpochLog log{epoch, total / static_cast<double>(count), 0.0};
    log.valid_loss = evaluate_loss(model, valid_batches);
    result.log.push_back(log);
    if (log.valid_loss < result.best_valid_loss) {
      result.best_valid_loss = log.valid_loss;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::vector<double> predict(TransformerModel<float>& model, const PairDataset& pairs,
                            std::span<const std::size_t> indices, const Matrix<float>& inputs,
                            const SubgraphCatalog& catalog, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (const auto& b : make_batches(pairs, indices, inputs, catalog, batch_size, std::nullopt)) {
    for (float z : model.logits(b)) out.push_back(sigmoid(static_cast<double>(z)));
  }
  return out;
}

template Matrix<float> gather_tokens(const Matrix<float>&, const Subgraph&);
template Matrix<double> gather_tokens(const Matrix<double>&, const Subgraph&);
template std::vector<PairBatch<float>> make_batches(const PairDataset&, std::span<const std::size_t>,
                                                    const Matrix<float>&, const SubgraphCatalog&,
                                                    std::size_t, std::optional<std::uint64_t>);
template std::vector<PairBatch<double>> make_batches(const PairDataset&,
                                                     std::span<const std::size_t>,
                                                     const Matrix<double>&, const SubgraphCatalog&,
                                                     std::size_t, std::optional<std::uint64_t>);
template class Adam<float>;
template class Adam<double>;
template double train_step(TransformerModel<float>&, Adam<float>&, const PairBatch<float>&, Rng*);
template double train_step(TransformerModel<double>&, Adam<double>&, const PairBatch<double>&,
                           Rng*);
template double evaluate_loss(TransformerModel<float>&, const std::vector<PairBatch<float>>&);
template double evaluate_loss(TransformerModel<double>&, const std::vector<PairBatch<double>>&);

}  // namespace tspe
