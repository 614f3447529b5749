#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tspe/checkpoint.hpp"
#include "tspe/cross_validation.hpp"
#include "tspe/error.hpp"
#include "tspe/train.hpp"

using namespace tspe;

namespace {

struct Fixture {
  SyntheticDataset data;
  EncodingBundle enc;
  ModelConfig model_cfg;
};

Fixture tiny_fixture() {
  SyntheticParams p;
  p.num_nodes = 120;
  p.num_subgraphs = 12;
  p.module_size = 6;
  p.num_pairs = 30;
  Fixture f{generate_synthetic(p), {}, {}};
  Rng rng(5);
  const std::size_t n = f.data.graph.num_nodes();
  f.enc.m = DenseMatrix(n, 4);
  f.enc.lpe.vectors = DenseMatrix(n, 4);
  f.enc.gpe.vectors = DenseMatrix(n, 2);
  for (auto* m : {&f.enc.m, &f.enc.lpe.vectors, &f.enc.gpe.vectors})
    for (double& v : m->storage()) v = rng.uniform(-1, 1);
  f.model_cfg.num_layers = 1;
  f.model_cfg.num_heads = 2;
  f.model_cfg.d_model = 8;
  f.model_cfg.input_width = 6;
  f.model_cfg.dropout = 0.0;
  return f;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

PairDataset labeled(const std::vector<int>& labels) {
  std::vector<PairRecord> r;
  for (std::size_t i = 0; i < labels.size(); ++i) r.push_back({i, i + 1, labels[i] ? 1.0 : 0.0});
  return PairDataset(r, ThresholdMode::RR0);
}

}  // namespace

TEST_CASE("make_batches pads each side to its longest subgraph") {
  std::vector<Subgraph> subs{{"a", {0, 1, 2}}, {"b", {0, 1, 2, 3, 4}}, {"c", {5, 6}}};
  SubgraphCatalog cat(subs, 7);
  PairDataset pairs({{0, 1, 1.0}, {1, 2, 0.0}}, ThresholdMode::RR0);
  Matrix<float> inputs(7, 3, 1.0f);
  auto idx = iota(2);
  auto batches = make_batches<float>(pairs, idx, inputs, cat, 20, std::nullopt);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].enc_len == 5);
  CHECK(batches[0].dec_len == 5);
  CHECK(batches[0].labels == std::vector<int>{1, 0});
  CHECK(batches[0].pair_index == std::vector<std::size_t>{0, 1});

  auto single = make_batches<float>(pairs, std::span(idx).first(1), inputs, cat, 20, std::nullopt);
  CHECK(single[0].enc_len == 3);
  CHECK(std::count(single[0].enc_mask.begin(), single[0].enc_mask.end(), 1) == 3);
  CHECK(std::count(single[0].dec_mask.begin(), single[0].dec_mask.end(), 1) == 5);

  auto split = make_batches<float>(pairs, idx, inputs, cat, 1, std::uint64_t{3});
  CHECK(split.size() == 2);
}

TEST_CASE("gather_tokens picks member rows") {
  Matrix<double> inputs(4, 2, {0, 0, 1, 1, 2, 2, 3, 3});
  auto t = gather_tokens(inputs, Subgraph{"s", {1, 3}});
  CHECK(t == Matrix<double>(2, 2, {1, 1, 3, 3}));
  CHECK_THROWS_AS(gather_tokens(inputs, Subgraph{"e", {}}), InvalidArgument);
}

TEST_CASE("stratified_kfold: exact quotas example") {
  auto ds = labeled({1, 1, 1, 1, 1, 1, 1, 1, 0, 0});
  auto plan = stratified_kfold(ds, 2, 7);
  REQUIRE(plan.k() == 2);
  for (const auto& f : plan.folds) {
    CHECK(f.size() == 5);
    CHECK(std::count_if(f.begin(), f.end(), [&](std::size_t i) { return ds.label(i) == 1; }) == 4);
  }
  CHECK(stratified_kfold(ds, 2, 7) == plan);
  CHECK(stratified_kfold(ds, 2, 8) != plan);
  CHECK_THROWS_AS(stratified_kfold(ds, 3, 7), InvalidArgument);
  CHECK_THROWS_AS(stratified_kfold(ds, 1, 7), InvalidArgument);
}

TEST_CASE("stratified_kfold: invariants on random datasets") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const std::size_t pos = k + rng.below(60), neg = k + rng.below(60);
    std::vector<int> labels(pos, 1);
    labels.insert(labels.end(), neg, 0);
    rng.shuffle(labels);
    auto ds = labeled(labels);
    auto plan = stratified_kfold(ds, k, trial);
    std::vector<int> seen(labels.size(), 0);
    for (const auto& f : plan.folds) {
      std::size_t p = 0;
      for (std::size_t i : f) {
        ++seen[i];
        p += labels[i];
      }
      const double quota = static_cast<double>(pos) / static_cast<double>(k);
      CHECK(std::abs(static_cast<double>(p) - quota) < 1.0 + 1e-12);
    }
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("stratified_holdout keeps the class balance") {
  auto ds = labeled({1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  auto idx = iota(20);
  auto [tr, va] = stratified_holdout(ds, idx, 0.2, 1);
  CHECK(va.size() == 4);
  CHECK(tr.size() == 16);
  CHECK(std::count_if(va.begin(), va.end(), [&](std::size_t i) { return ds.label(i); }) == 2);
}

TEST_CASE("Adam: first step moves every coordinate by about the learning rate") {
  ad::Parameter<float> p{"p", Matrix<float>(1, 3, {1, -2, 3}), Matrix<float>(1, 3, {0.5f, -4, 1e-3f})};
  std::vector<ad::Parameter<float>> ps{p};
  Adam<float> adam(0.01);
  adam.step(ps);
  CHECK(ps[0].value(0, 0) == doctest::Approx(0.99).epsilon(1e-5));
  CHECK(ps[0].value(0, 1) == doctest::Approx(-1.99).epsilon(1e-5));
  CHECK(ps[0].value(0, 2) == doctest::Approx(2.99).epsilon(1e-4));
}

TEST_CASE("train: zero learning rate leaves parameters unchanged") {
  auto f = tiny_fixture();
  TrainConfig cfg;
  cfg.learning_rate = 0;
  cfg.batch_size = 8;
  cfg.max_epochs = 3;
  cfg.patience = 10;
  TransformerModel<float> init(f.model_cfg, 1);
  auto idx = iota(f.data.pairs.size());
  auto r = train(init, f.data.pairs, idx, {&f.enc, PeMode::SPE}, f.data.catalog, cfg);
  for (std::size_t i = 0; i < init.parameters().size(); ++i)
    CHECK(r.model.parameters()[i].value == init.parameters()[i].value);
  REQUIRE(r.log.size() == 3);
  CHECK(r.log[1].valid_loss == r.log[0].valid_loss);
  CHECK(r.log[2].train_loss == doctest::Approx(r.log[0].train_loss).epsilon(1e-6));
}

TEST_CASE("train: determinism, early stopping, held-out split") {
  auto f = tiny_fixture();
  f.model_cfg.dropout = 0.2;
  f.model_cfg.input_width = 4;
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 8;
  cfg.max_epochs = 30;
  cfg.patience = 3;
  cfg.seed = 4;
  auto idx = iota(f.data.pairs.size());
  auto run = [&] {
    auto r = train(TransformerModel<float>(f.model_cfg, 2), f.data.pairs, idx,
                   {&f.enc, PeMode::LPE}, f.data.catalog, cfg);
    Checkpoint c;
    add_model(c, r.model);
    return std::pair{r, c.encode()};
  };
  auto [a, bytes_a] = run();
  auto [b, bytes_b] = run();
  CHECK(bytes_a == bytes_b);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.log.size() <= 30);
  if (a.log.size() < 30) CHECK(a.log.size() == a.best_epoch + 1 + cfg.patience);
  double best = a.log[a.best_epoch].valid_loss;
  for (const auto& e : a.log) CHECK(e.valid_loss >= best);
  CHECK(a.best_valid_loss == best);
  std::vector<std::size_t> all(a.train_indices);
  all.insert(all.end(), a.valid_indices.begin(), a.valid_indices.end());
  std::sort(all.begin(), all.end());
  CHECK(all == idx);
  // 15 pairs per class; a tenth of each rounds to 2.
  CHECK(a.valid_indices.size() == 4);
}

TEST_CASE("train: errors") {
  auto f = tiny_fixture();
  TrainConfig cfg;
  auto idx = iota(10);
  CHECK_THROWS_AS(train(TransformerModel<float>(f.model_cfg, 1), f.data.pairs, idx,
                        {&f.enc, PeMode::SPE}, f.data.catalog, cfg),
                  InvalidArgument);
  cfg.valid_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);

  // Non-finite inputs abort with the epoch and batch in the message.
  cfg = {};
  cfg.batch_size = 8;
  auto bad = f.enc;
  for (double& v : bad.m.storage()) v = std::numeric_limits<double>::infinity();
  f.model_cfg.input_width = 4;
  auto all = iota(f.data.pairs.size());
  CHECK_THROWS_WITH_AS(train(TransformerModel<float>(f.model_cfg, 1), f.data.pairs, all,
                             {&bad, PeMode::NoPE}, f.data.catalog, cfg),
                       doctest::Contains("epoch 0 batch 0"), NumericalError);
}

TEST_CASE("predict returns probabilities in index order") {
  auto f = tiny_fixture();
  TransformerModel<float> model(f.model_cfg, 3);
  auto inputs = f.enc.input(PeMode::SPE).cast<float>();
  auto idx = iota(f.data.pairs.size());
  auto p = predict(model, f.data.pairs, idx, inputs, f.data.catalog, 7);
  auto q = predict(model, f.data.pairs, idx, inputs, f.data.catalog, 64);
  REQUIRE(p.size() == idx.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i] > 0.0);
    CHECK(p[i] < 1.0);
    CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-5));
  }
}

TEST_CASE("metrics report arithmetic, drop-worst and JSON") {
  MetricsReport r;
  r.master_seed = 1;
  r.folds = {{0.8, 0.7}, {0.6, 0.9}, {0.9, 0.8}, {0.6, 0.5}};
  r.fold_seeds = {11, 12, 13, 14};
  auto m = r.mean();
  auto s = r.std();
  CHECK(m.roc_auc == doctest::Approx(0.725));
  CHECK(m.accuracy == doctest::Approx(0.725));
  CHECK(s.roc_auc == doctest::Approx(0.15));
  auto d = r.drop_worst(1);
  REQUIRE(d.folds.size() == 3);
  // Tie at 0.6: the later fold is dropped.
  CHECK(d.folds[1].accuracy == 0.9);
  CHECK(d.folds[2].roc_auc == 0.9);
  CHECK_THROWS_AS(r.drop_worst(4), InvalidArgument);
  auto j = r.to_json();
  CHECK(j["folds"].size() == 4);
  CHECK(j["seeds"]["master"] == 1);
  CHECK(j["mean"]["roc_auc"].get<double>() == doctest::Approx(0.725));
  CHECK(j.contains("std"));
  CHECK(j.contains("config"));
  CHECK(format_mean_std(0.80091, 0.01523) == "0.8009 ± 0.0152");
  CHECK(r.to_table("T").find("0.7250") != std::string::npos);
}

TEST_CASE("cross_validate: no leaks, jobs-independent, ablation layout") {
  auto f = tiny_fixture();
  TrainConfig tc;
  tc.batch_size = 6;
  tc.max_epochs = 4;
  tc.learning_rate = 1e-3;
  CvOptions opt;
  opt.k = 3;
  opt.seed = 5;
  auto a = cross_validate(f.data.pairs, f.enc, f.data.catalog, f.model_cfg, tc, opt);
  CHECK(a.leak_checks == 3);
  REQUIRE(a.folds.size() == 3);
  CHECK(a.fold_seeds.size() == 3);
  opt.jobs = 3;
  auto b = cross_validate(f.data.pairs, f.enc, f.data.catalog, f.model_cfg, tc, opt);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.folds[i].roc_auc == b.folds[i].roc_auc);
    CHECK(a.folds[i].accuracy == b.folds[i].accuracy);
  }
  opt.jobs = 1;
  opt.mode = PeMode::NoPE;
  auto c = cross_validate(f.data.pairs, f.enc, f.data.catalog, f.model_cfg, tc, opt);
  auto table = ablation_table({{PeMode::NoPE, c}, {PeMode::SPE, a}}, 1);
  CHECK(table.find("ROC AUC") != std::string::npos);
  CHECK(table.find("Accuracy") != std::string::npos);
  CHECK(table.find("NoPE") != std::string::npos);
  CHECK(table.find("After Removing 1 Outlier") != std::string::npos);
}
