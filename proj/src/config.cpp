#include "tspe/config.hpp"

#include <charconv>
#include <functional>

#include "tspe/checkpoint.hpp"
#include "tspe/error.hpp"

namespace tspe {

namespace {

using json = nlohmann::json;

struct Field {
  std::string key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
  // How a command-line string becomes JSON for `set`.
  enum Kind { String, Unsigned, Real, Bool } kind;
};

template <class M>
Field field(std::string key, M RunConfig::*member, Field::Kind kind) {
  return {std::move(key), [member](const RunConfig& c) { return json(c.*member); },
          [member](RunConfig& c, const json& j) { c.*member = j.get<M>(); }, kind};
}

template <class S, class M>
Field nested(std::string key, S RunConfig::*outer, M S::*inner, Field::Kind kind) {
  return {std::move(key), [=](const RunConfig& c) { return json((c.*outer).*inner); },
          [=](RunConfig& c, const json& j) { (c.*outer).*inner = j.get<M>(); }, kind};
}

template <class E>
Field enum_field(std::string key, E RunConfig::*member, std::string (*show)(E),
                 E (*parse)(std::string_view)) {
  return {std::move(key), [=](const RunConfig& c) { return json(show(c.*member)); },
          [=](RunConfig& c, const json& j) { c.*member = parse(j.get<std::string>()); },
          Field::String};
}

std::string show_mode(ThresholdMode m) { return to_string(m); }
ThresholdMode read_mode(std::string_view s) { return parse_threshold_mode(s); }
std::string show_pe(PeMode m) { return to_string(m); }
PeMode read_pe(std::string_view s) { return parse_pe_mode(s); }
std::string show_gee(GeeAdjacency a) { return to_string(a); }
GeeAdjacency read_gee(std::string_view s) { return parse_gee_adjacency(s); }

std::string show_method(EigenMethod m) {
  switch (m) {
    case EigenMethod::Dense: return "dense";
    case EigenMethod::Lanczos: return "lanczos";
    case EigenMethod::Auto: break;
  }
  return "auto";
}

EigenMethod read_method(std::string_view s) {
  if (s == "auto") return EigenMethod::Auto;
  if (s == "dense") return EigenMethod::Dense;
  if (s == "lanczos") return EigenMethod::Lanczos;
  throw ConfigError("eig_method must be auto, dense or lanczos, got '" + std::string(s) + "'");
}

const std::vector<Field>& fields() {
  using K = Field::Kind;
  static const std::vector<Field> table = {
      field("graph", &RunConfig::graph, K::String),
      field("catalog", &RunConfig::catalog, K::String),
      field("pairs", &RunConfig::pairs, K::String),
      field("out", &RunConfig::out, K::String),
      field("checkpoint", &RunConfig::checkpoint, K::String),
      field("embeddings", &RunConfig::embeddings, K::String),
      field("encodings", &RunConfig::encodings, K::String),
      field("seed", &RunConfig::seed, K::Unsigned),
      enum_field("mode", &RunConfig::mode, show_mode, read_mode),
      enum_field("pe", &RunConfig::pe, show_pe, read_pe),
      field("jobs", &RunConfig::jobs, K::Unsigned),
      field("folds", &RunConfig::folds, K::Unsigned),
      field("drop_worst_fold", &RunConfig::drop_worst_fold, K::Unsigned),
      field("ablation", &RunConfig::ablation, K::Bool),
      field("use_lcc", &RunConfig::use_lcc, K::Bool),
      field("strict_catalog", &RunConfig::strict_catalog, K::Bool),
      nested("walk_p", &RunConfig::walk, &WalkConfig::p, K::Real),
      nested("walk_q", &RunConfig::walk, &WalkConfig::q, K::Real),
      nested("walk_length", &RunConfig::walk, &WalkConfig::walk_length, K::Unsigned),
      nested("walks_per_node", &RunConfig::walk, &WalkConfig::walks_per_node, K::Unsigned),
      nested("embedding_dim", &RunConfig::skipgram, &SkipGramConfig::dim, K::Unsigned),
      nested("window", &RunConfig::skipgram, &SkipGramConfig::window, K::Unsigned),
      nested("negative_samples", &RunConfig::skipgram, &SkipGramConfig::negative_samples,
             K::Unsigned),
      nested("skipgram_epochs", &RunConfig::skipgram, &SkipGramConfig::epochs, K::Unsigned),
      nested("skipgram_learning_rate", &RunConfig::skipgram, &SkipGramConfig::learning_rate,
             K::Real),
      field("lpe_dim", &RunConfig::lpe_dim, K::Unsigned),
      field("gpe_dim", &RunConfig::gpe_dim, K::Unsigned),
      enum_field("gee_adjacency", &RunConfig::gee_adjacency, show_gee, read_gee),
      field("gpe_scale_by_sigma", &RunConfig::gpe_scale_by_sigma, K::Bool),
      field("eig_tol", &RunConfig::eig_tol, K::Real),
      enum_field("eig_method", &RunConfig::eig_method, show_method, read_method),
      nested("num_layers", &RunConfig::model, &ModelConfig::num_layers, K::Unsigned),
      nested("num_heads", &RunConfig::model, &ModelConfig::num_heads, K::Unsigned),
      nested("d_model", &RunConfig::model, &ModelConfig::d_model, K::Unsigned),
      nested("ffn_multiplier", &RunConfig::model, &ModelConfig::ffn_multiplier, K::Unsigned),
      nested("dropout", &RunConfig::model, &ModelConfig::dropout, K::Real),
      nested("lpe_sign_flip", &RunConfig::model, &ModelConfig::lpe_sign_flip, K::Bool),
      nested("learning_rate", &RunConfig::train, &TrainConfig::learning_rate, K::Real),
      nested("batch_size", &RunConfig::train, &TrainConfig::batch_size, K::Unsigned),
      nested("valid_fraction", &RunConfig::train, &TrainConfig::valid_fraction, K::Real),
      nested("max_epochs", &RunConfig::train, &TrainConfig::max_epochs, K::Unsigned),
      nested("patience", &RunConfig::train, &TrainConfig::patience, K::Unsigned),
      nested("synth_num_nodes", &RunConfig::synth, &SyntheticParams::num_nodes, K::Unsigned),
      nested("synth_num_subgraphs", &RunConfig::synth, &SyntheticParams::num_subgraphs,
             K::Unsigned),
      nested("synth_module_size", &RunConfig::synth, &SyntheticParams::module_size, K::Unsigned),
      nested("synth_overlap_fraction", &RunConfig::synth, &SyntheticParams::overlap_fraction,
             K::Real),
      nested("synth_p_in", &RunConfig::synth, &SyntheticParams::p_in, K::Real),
      nested("synth_p_bg", &RunConfig::synth, &SyntheticParams::p_bg, K::Real),
      nested("synth_num_pairs", &RunConfig::synth, &SyntheticParams::num_pairs, K::Unsigned),
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply(RunConfig& cfg, const Field& f, const json& value) {
  try {
    f.set(cfg, value);
  } catch (const json::exception&) {
    throw ConfigError("config key '" + f.key + "' has the wrong type (" +
                      std::string(value.type_name()) + ")");
  } catch (const Error& e) {
    throw ConfigError("config key '" + f.key + "': " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return names;
}

bool RunConfig::is_boolean(const std::string& key) {
  return find_field(key).kind == Field::Bool;
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) apply(cfg, find_field(key), value);
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  json j;
  switch (f.kind) {
    case Field::String:
      j = value;
      break;
    case Field::Unsigned: {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError("--" + key + " expects a non-negative integer, got '" + value + "'");
      }
      j = v;
      break;
    }
    case Field::Real: {
      double v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError("--" + key + " expects a number, got '" + value + "'");
      }
      j = v;
      break;
    }
    case Field::Bool:
      if (value == "true" || value == "1") {
        j = true;
      } else if (value == "false" || value == "0") {
        j = false;
      } else {
        throw ConfigError("--" + key + " expects true or false, got '" + value + "'");
      }
      break;
  }
  apply(*this, f, j);
}

void RunConfig::validate() const {
  if (skipgram.dim != lpe_dim) {
    throw ConfigError("embedding_dim (" + std::to_string(skipgram.dim) + ") must equal lpe_dim (" +
                      std::to_string(lpe_dim) + ") because E adds M and LPE element-wise");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (gpe_dim < 1) throw ConfigError("gpe_dim must be >= 1");
  if (!(eig_tol > 0.0)) throw ConfigError("eig_tol must be > 0");
  try {
    walk.validate();
    skipgram.validate();
    train.validate();
    ModelConfig m = model;
    m.input_width = EncodingBundle::input_width(pe, skipgram.dim, gpe_dim);
    m.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

LoadedData load_data(const RunConfig& cfg, bool need_pairs) {
  if (cfg.graph.empty()) throw ConfigError("no graph file given (--graph)");
  if (cfg.catalog.empty()) throw ConfigError("no catalog file given (--catalog)");
  LoadedData d;
  d.graph = parse_edge_list(read_file(cfg.graph));
  if (cfg.use_lcc) d.graph = largest_connected_component(d.graph).graph;
  d.catalog = parse_subgraph_catalog(read_file(cfg.catalog), d.graph, &d.catalog_report,
                                     cfg.strict_catalog);
  if (need_pairs) {
    if (cfg.pairs.empty()) throw ConfigError("no pairs file given (--pairs)");
    d.pairs = parse_pair_dataset(read_file(cfg.pairs), d.catalog, cfg.mode);
  }
  return d;
}

NodeEmbeddings build_embeddings(const SparseGraph& graph, const RunConfig& cfg) {
  WalkConfig wc = cfg.walk;
  wc.seed = derive_seed(cfg.seed, "walks");
  SkipGramConfig sg = cfg.skipgram;
  sg.seed = derive_seed(cfg.seed, "skipgram");
  return train_skipgram(generate_walks(graph, wc), sg, graph.num_nodes());
}

EncodingBundle build_encodings(const SparseGraph& graph, const SubgraphCatalog& catalog,
                               const RunConfig& cfg, const DenseMatrix* embeddings) {
  EncodingBundle b;
  b.m = embeddings ? *embeddings : build_embeddings(graph, cfg).matrix;
  if (b.m.rows() != graph.num_nodes() || b.m.cols() != cfg.skipgram.dim) {
    throw InvalidArgument("embedding matrix is " + std::to_string(b.m.rows()) + "x" +
                          std::to_string(b.m.cols()) + ", expected " +
                          std::to_string(graph.num_nodes()) + "x" +
                          std::to_string(cfg.skipgram.dim));
  }
  LpeOptions lo;
  lo.k = cfg.lpe_dim;
  lo.tol = cfg.eig_tol;
  lo.seed = derive_seed(cfg.seed, "lpe");
  lo.method = cfg.eig_method;
  b.lpe = lpe(graph, lo);
  const DenseMatrix w = build_weight_matrix(catalog, graph.num_nodes());
  b.gpe = gpe(gee_embed(graph, w, cfg.gee_adjacency), cfg.gpe_dim, cfg.gpe_scale_by_sigma);
  return b;
}

}  // namespace tspe
