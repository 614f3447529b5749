// tspe: command-line driver for the embedding, encoding, training and
// evaluation pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "tspe/checkpoint.hpp"
#include "tspe/config.hpp"
#include "tspe/cross_validation.hpp"
#include "tspe/error.hpp"
#include "tspe/metrics.hpp"

namespace fs = std::filesystem;
using namespace tspe;

namespace {

std::string out_or(const RunConfig& cfg, const std::string& fallback) {
  return cfg.out.empty() ? fallback : cfg.out;
}

EncodingBundle encodings_for(const LoadedData& data, const RunConfig& cfg) {
  if (!cfg.encodings.empty()) {
    EncodingBundle b = load_encodings(Checkpoint::load(cfg.encodings));
    if (b.m.rows() != data.graph.num_nodes()) {
      throw InvalidArgument(cfg.encodings + " has " + std::to_string(b.m.rows()) +
                            " rows but the graph has " + std::to_string(data.graph.num_nodes()) +
                            " nodes");
    }
    return b;
  }
  if (!cfg.embeddings.empty()) {
    const DenseMatrix m = Checkpoint::load(cfg.embeddings).matrix("M");
    return build_encodings(data.graph, data.catalog, cfg, &m);
  }
  return build_encodings(data.graph, data.catalog, cfg);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

int cmd_embed(const RunConfig& cfg) {
  if (cfg.graph.empty()) throw ConfigError("no graph file given (--graph)");
  SparseGraph graph = parse_edge_list(read_file(cfg.graph));
  if (cfg.use_lcc) graph = largest_connected_component(graph).graph;
  const NodeEmbeddings emb = build_embeddings(graph, cfg);
  Checkpoint ckpt;
  ckpt.config = cfg.to_json();
  ckpt.add("M", emb.matrix);
  DenseMatrix loss(1, emb.epoch_loss.size());
  std::copy(emb.epoch_loss.begin(), emb.epoch_loss.end(), loss.storage().begin());
  ckpt.add("skipgram.epoch_loss", loss);
  const std::string out = out_or(cfg, "embeddings.tspe");
  ckpt.save(out);
  std::printf("wrote %s (%zu x %zu)\n", out.c_str(), emb.matrix.rows(), emb.matrix.cols());
  return 0;
}

int cmd_pe(const RunConfig& cfg) {
  const LoadedData data = load_data(cfg, false);
  RunConfig c = cfg;
  c.encodings.clear();
  const EncodingBundle b = encodings_for(data, c);
  Checkpoint ckpt;
  ckpt.config = cfg.to_json();
  add_encodings(ckpt, b);
  const std::string out = out_or(cfg, "encodings.tspe");
  ckpt.save(out);
  std::printf("wrote %s (N=%zu, zero modes=%zu, lambda_1=%.6g)\n", out.c_str(), b.m.rows(),
              b.lpe.zero_modes, b.lpe.eigenvalues.empty() ? 0.0 : b.lpe.eigenvalues.front());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const LoadedData data = load_data(cfg);
  const EncodingBundle b = encodings_for(data, cfg);
  ModelConfig mc = cfg.model;
  mc.input_width = EncodingBundle::input_width(cfg.pe, b.m.cols(), b.gpe.vectors.cols());
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train");
  TransformerModel<float> model(mc, derive_seed(cfg.seed, "init"));
  const auto idx = all_indices(data.pairs.size());
  TrainResult r = train(std::move(model), data.pairs, idx, InputSource{&b, cfg.pe}, data.catalog, tc);

  Checkpoint ckpt;
  ckpt.config = cfg.to_json();
  add_model(ckpt, r.model);
  ckpt.add("E", b.input(cfg.pe));
  const std::string out = out_or(cfg, "model.tspe");
  ckpt.save(out);

  std::ostringstream log;
  log << "epoch\ttrain_loss\tvalid_loss\n";
  char buf[96];
  for (const auto& e : r.log) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", e.epoch, e.train_loss, e.valid_loss);
    log << buf;
  }
  write_file_atomic(out + ".log.tsv", log.str());
  std::printf("wrote %s (best epoch %zu, valid loss %.6f)\n", out.c_str(), r.best_epoch,
              r.best_valid_loss);
  return 0;
}

void emit_report(const RunConfig& cfg, const nlohmann::json& j, const std::string& table) {
  std::cout << table;
  if (!cfg.out.empty()) write_file_atomic(cfg.out, j.dump(2) + "\n");
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("no checkpoint given (--checkpoint)");
  const Checkpoint ckpt = Checkpoint::load(cfg.checkpoint);
  const RunConfig trained = RunConfig::from_json(ckpt.config);
  const LoadedData data = load_data(cfg);
  const Matrix<float> e = ckpt.matrix_f32("E");
  if (e.rows() != data.graph.num_nodes()) {
    throw InvalidArgument("checkpoint encodings have " + std::to_string(e.rows()) +
                          " rows but the graph has " + std::to_string(data.graph.num_nodes()) +
                          " nodes");
  }
  ModelConfig mc = trained.model;
  mc.input_width = e.cols();
  TransformerModel<float> model = load_model(ckpt, mc);
  const auto idx = all_indices(data.pairs.size());
  const auto probs = predict(model, data.pairs, idx, e, data.catalog);
  const auto labels = data.pairs.labels();

  MetricsReport report;
  report.config = trained.to_json();
  report.master_seed = trained.seed;
  report.folds.push_back({roc_auc(probs, labels), accuracy(probs, labels)});
  emit_report(cfg, report.to_json(), report.to_table("evaluation on " + cfg.pairs));
  return 0;
}

int cmd_cv(const RunConfig& cfg) {
  const LoadedData data = load_data(cfg);
  const EncodingBundle b = encodings_for(data, cfg);
  CvOptions opt;
  opt.k = cfg.folds;
  opt.seed = cfg.seed;
  opt.jobs = cfg.jobs;

  if (cfg.ablation) {
    std::vector<std::pair<PeMode, MetricsReport>> reports;
    nlohmann::json j;
    j["config"] = cfg.to_json();
    for (PeMode m : {PeMode::NoPE, PeMode::LPE, PeMode::SPE}) {
      opt.mode = m;
      MetricsReport r = cross_validate(data.pairs, b, data.catalog, cfg.model, cfg.train, opt);
      RunConfig echo = cfg;
      echo.pe = m;
      r.config = echo.to_json();
      j[to_string(m)] = r.to_json();
      if (cfg.drop_worst_fold > 0) {
        j[to_string(m)]["drop_worst"] = r.drop_worst(cfg.drop_worst_fold).to_json();
      }
      reports.emplace_back(m, std::move(r));
    }
    emit_report(cfg, j, ablation_table(reports, cfg.drop_worst_fold));
    return 0;
  }

  opt.mode = cfg.pe;
  MetricsReport r = cross_validate(data.pairs, b, data.catalog, cfg.model, cfg.train, opt);
  r.config = cfg.to_json();
  nlohmann::json j = r.to_json();
  std::string table = r.to_table(std::to_string(cfg.folds) + "-fold cross-validation (" +
                                 to_display(cfg.pe) + ", " + to_string(cfg.mode) + ")");
  if (cfg.drop_worst_fold > 0) {
    const MetricsReport d = r.drop_worst(cfg.drop_worst_fold);
    j["drop_worst"] = d.to_json();
    table += d.to_table("after removing " + std::to_string(cfg.drop_worst_fold) + " worst fold(s)");
  }
  emit_report(cfg, j, table);
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  SyntheticParams p = cfg.synth;
  p.seed = cfg.seed;
  const SyntheticDataset d = generate_synthetic(p);
  const fs::path dir = out_or(cfg, "synthetic");
  fs::create_directories(dir);
  write_file_atomic(dir / "graph.tsv", d.graph.to_edge_list());
  write_file_atomic(dir / "catalog.tsv", d.catalog.to_tsv(d.graph));
  write_file_atomic(dir / "pairs.tsv", d.pairs.to_tsv(d.catalog));
  std::printf("wrote %s/{graph,catalog,pairs}.tsv (%zu nodes, %zu edges, %zu subgraphs, %zu pairs)\n",
              dir.string().c_str(), d.graph.num_nodes(), d.graph.num_edges(), d.catalog.size(),
              d.pairs.size());
  return 0;
}

std::string dashed(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TSPE: transformer with subgraph positional encoding"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration");
  std::map<std::string, CLI::Option*> overrides;
  std::map<std::string, std::vector<std::string>> values;
  for (const auto& key : RunConfig::keys()) {
    std::string names = "--" + key;
    if (dashed(key) != key) names += ",--" + dashed(key);
    auto* opt = app.add_option(names, values[key], "config key " + key);
    if (RunConfig::is_boolean(key)) opt->expected(0, 1);
    overrides[key] = opt;
  }

  using Handler = int (*)(const RunConfig&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"embed", "node2vec embeddings of the graph", cmd_embed},
      {"pe", "LPE / GPE / SPE encodings", cmd_pe},
      {"train", "train one model on all pairs", cmd_train},
      {"eval", "score a pair file with a trained checkpoint", cmd_eval},
      {"cv", "stratified k-fold cross-validation", cmd_cv},
      {"synth", "write a synthetic graph / catalog / pair dataset", cmd_synth},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& [key, opt] : overrides) {
      if (opt->count() == 0) continue;
      // A bare boolean flag arrives as no value or an empty one.
      const auto& v = values[key];
      cfg.set(key, v.empty() || v.back().empty() ? "true" : v.back());
    }
    cfg.validate();
    for (const auto& [name, help, fn] : commands) {
      if (app.got_subcommand(name)) return fn(cfg);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 1;
}
