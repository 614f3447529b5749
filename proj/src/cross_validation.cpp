#include "tspe/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>

#include "tspe/error.hpp"
#include "tspe/metrics.hpp"

namespace tspe {

std::vector<std::size_t> FoldPlan::complement(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan stratified_kfold(const PairDataset& dataset, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("k must be >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.label(i)].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < k) {
      throw InvalidArgument("class " + std::to_string(c) + " has " +
                            std::to_string(by_class[c].size()) + " members, fewer than k = " +
                            std::to_string(k));
    }
  }
  FoldPlan plan;
  plan.folds.resize(k);
  std::size_t slot = 0;
  // Positives first so the quota example (8 pos / 2 neg, k = 2) is exact.
  for (int c : {1, 0}) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(by_class[c]);
    for (std::size_t i : by_class[c]) plan.folds[slot++ % k].push_back(i);
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

FoldMetrics MetricsReport::mean() const {
  FoldMetrics m;
  if (folds.empty()) return m;
  for (const auto& f : folds) {
    m.roc_auc += f.roc_auc;
    m.accuracy += f.accuracy;
  }
  m.roc_auc /= static_cast<double>(folds.size());
  m.accuracy /= static_cast<double>(folds.size());
  return m;
}

FoldMetrics MetricsReport::std() const {
  FoldMetrics s;
  if (folds.size() < 2) return s;
  const FoldMetrics m = mean();
  for (const auto& f : folds) {
    s.roc_auc += (f.roc_auc - m.roc_auc) * (f.roc_auc - m.roc_auc);
    s.accuracy += (f.accuracy - m.accuracy) * (f.accuracy - m.accuracy);
  }
  const double denom = static_cast<double>(folds.size() - 1);
  s.roc_auc = std::sqrt(s.roc_auc / denom);
  s.accuracy = std::sqrt(s.accuracy / denom);
  return s;
}

MetricsReport MetricsReport::drop_worst(std::size_t n) const {
  if (n >= folds.size()) throw InvalidArgument("cannot drop every fold");
  std::vector<std::size_t> order(folds.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (folds[a].roc_auc != folds[b].roc_auc) return folds[a].roc_auc < folds[b].roc_auc;
    return a > b;
  });
  std::vector<bool> dropped(folds.size(), false);
  for (std::size_t i = 0; i < n; ++i) dropped[order[i]] = true;
  MetricsReport out = *this;
  out.folds.clear();
  out.fold_seeds.clear();
  out.best_epochs.clear();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (dropped[f]) continue;
    out.folds.push_back(folds[f]);
    if (f < fold_seeds.size()) out.fold_seeds.push_back(fold_seeds[f]);
    if (f < best_epochs.size()) out.best_epochs.push_back(best_epochs[f]);
  }
  return out;
}

std::string format_mean_std(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean, std);
  return buf;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  j["seeds"] = {{"master", master_seed}, {"folds", fold_seeds}};
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) j["folds"].push_back({{"roc_auc", f.roc_auc}, {"accuracy", f.accuracy}});
  const auto m = mean();
  const auto s = std();
  j["mean"] = {{"roc_auc", m.roc_auc}, {"accuracy", m.accuracy}};
  j["std"] = {{"roc_auc", s.roc_auc}, {"accuracy", s.accuracy}};
  return j;
}

std::string MetricsReport::to_table(const std::string& title) const {
  std::ostringstream os;
  if (!title.empty()) os << title << '\n';
  os << "fold\troc_auc\taccuracy\n";
  char buf[96];
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::snprintf(buf, sizeof buf, "%zu\t%.4f\t%.4f\n", f, folds[f].roc_auc, folds[f].accuracy);
    os << buf;
  }
  const auto m = mean();
  const auto s = std();
  os << "ROC AUC\t" << format_mean_std(m.roc_auc, s.roc_auc) << '\n';
  os << "Accuracy\t" << format_mean_std(m.accuracy, s.accuracy) << '\n';
  return os.str();
}

namespace {

struct FoldOutcome {
  FoldMetrics metrics;
  std::size_t best_epoch = 0;
  std::size_t leak_checks = 0;
};

void assert_no_leak(const std::vector<std::size_t>& test, const TrainResult& r) {
  // All three lists are sorted.
  for (const auto* part : {&r.train_indices, &r.valid_indices}) {
    std::vector<std::size_t> overlap;
    std::set_intersection(test.begin(), test.end(), part->begin(), part->end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) {
      throw Error("leak", "held-out pair " + std::to_string(overlap.front()) +
                              " appears in the training split");
    }
  }
}

}  // namespace

MetricsReport cross_validate(const PairDataset& dataset, const EncodingBundle& encodings,
                             const SubgraphCatalog& catalog, ModelConfig model_cfg,
                             TrainConfig train_cfg, const CvOptions& options) {
  if (options.jobs < 1) throw InvalidArgument("jobs must be >= 1");
  const FoldPlan plan = stratified_kfold(dataset, options.k, derive_seed(options.seed, "folds"));
  const DenseMatrix input = encodings.input(options.mode);
  model_cfg.input_width = input.cols();
  model_cfg.validate();
  const Matrix<float> input_f = input.cast<float>();

  MetricsReport report;
  report.master_seed = options.seed;
  for (std::size_t f = 0; f < plan.k(); ++f) {
    report.fold_seeds.push_back(derive_seed(options.seed, static_cast<std::uint64_t>(f)));
  }

  const auto k = static_cast<std::ptrdiff_t>(plan.k());
  std::vector<FoldOutcome> outcomes(plan.k());
  std::vector<std::exception_ptr> errors(plan.k());
  const InputSource source{&encodings, options.mode};

#pragma omp parallel for schedule(dynamic, 1) num_threads(options.jobs)
  for (std::ptrdiff_t fi = 0; fi < k; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    try {
      const std::uint64_t fold_seed = report.fold_seeds[f];
      TrainConfig tc = train_cfg;
      tc.seed = derive_seed(fold_seed, "train");
      TransformerModel<float> model(model_cfg, derive_seed(fold_seed, "init"));
      const auto train_idx = plan.complement(f);
      TrainResult r = train(std::move(model), dataset, train_idx, source, catalog, tc);
      const auto& test = plan.folds[f];
      assert_no_leak(test, r);
      const auto probs = predict(r.model, dataset, test, input_f, catalog);
      std::vector<int> labels;
      for (std::size_t i : test) labels.push_back(dataset.label(i));
      outcomes[f].metrics = {roc_auc(probs, labels), accuracy(probs, labels)};
      outcomes[f].best_epoch = r.best_epoch;
      outcomes[f].leak_checks = 1;
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& o : outcomes) {
    report.folds.push_back(o.metrics);
    report.best_epochs.push_back(o.best_epoch);
    report.leak_checks += o.leak_checks;
  }
  return report;
}

std::string ablation_table(const std::vector<std::pair<PeMode, MetricsReport>>& reports,
                           std::size_t drop_worst) {
  std::ostringstream os;
  auto block = [&](const std::vector<MetricsReport>& rs) {
    os << "Metric";
    for (const auto& [mode, r] : reports) os << '\t' << to_display(mode);
    os << '\n';
    os << "ROC AUC";
    for (const auto& r : rs) os << '\t' << format_mean_std(r.mean().roc_auc, r.std().roc_auc);
    os << "\nAccuracy";
    for (const auto& r : rs) os << '\t' << format_mean_std(r.mean().accuracy, r.std().accuracy);
    os << '\n';
  };
  std::vector<MetricsReport> full;
  for (const auto& [mode, r] : reports) full.push_back(r);
  const std::size_t k = full.empty() ? 0 : full.front().folds.size();
  os << k << "-Fold Cross-Validation\n";
  block(full);
  if (drop_worst > 0) {
    std::vector<MetricsReport> trimmed;
    for (const auto& r : full) trimmed.push_back(r.drop_worst(drop_worst));
    os << "After Removing " << drop_worst << (drop_worst == 1 ? " Outlier\n" : " Outliers\n");
    block(trimmed);
  }
  return os.str();
}

}  // namespace tspe
