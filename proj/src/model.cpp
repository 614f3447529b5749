#include "tspe/model.hpp"

#include <algorithm>
#include <cmath>

#include "tspe/error.hpp"

namespace tspe {

void ModelConfig::validate() const {
  if (num_layers == 0) throw InvalidArgument("num_layers must be >= 1");
  if (num_heads == 0 || d_model % num_heads != 0) {
    throw InvalidArgument("d_model must be divisible by num_heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  if (input_width == 0) throw InvalidArgument("input_width must be >= 1");
  if (ffn_multiplier == 0) throw InvalidArgument("ffn_multiplier must be >= 1");
}

template <class T>
PairBatch<T> PairBatch<T>::from_pairs(std::span<const Matrix<T>> side_a,
                                      std::span<const Matrix<T>> side_b, std::vector<int> labels) {
  if (side_a.size() != side_b.size() || side_a.size() != labels.size() || side_a.empty()) {
    throw InvalidArgument("PairBatch: inconsistent pair counts");
  }
  PairBatch out;
  out.batch = side_a.size();
  const std::size_t width = side_a[0].cols();
  for (std::size_t i = 0; i < out.batch; ++i) {
    if (side_a[i].rows() == 0 || side_b[i].rows() == 0) {
      throw InvalidArgument("PairBatch: empty subgraph");
    }
    if (side_a[i].cols() != width || side_b[i].cols() != width) {
      throw InvalidArgument("PairBatch: token width mismatch");
    }
    out.enc_len = std::max(out.enc_len, side_a[i].rows());
    out.dec_len = std::max(out.dec_len, side_b[i].rows());
  }
  out.enc_tokens = Matrix<T>(out.batch * out.enc_len, width);
  out.dec_tokens = Matrix<T>(out.batch * out.dec_len, width);
  out.enc_mask.assign(out.batch * out.enc_len, 0);
  out.dec_mask.assign(out.batch * out.dec_len, 0);
  auto fill = [width](const Matrix<T>& src, Matrix<T>& dst, std::vector<std::uint8_t>& mask,
                      std::size_t base) {
    for (std::size_t r = 0; r < src.rows(); ++r) {
      std::copy_n(src.row(r).data(), width, dst.row(base + r).data());
      mask[base + r] = 1;
    }
  };
  for (std::size_t i = 0; i < out.batch; ++i) {
    fill(side_a[i], out.enc_tokens, out.enc_mask, i * out.enc_len);
    fill(side_b[i], out.dec_tokens, out.dec_mask, i * out.dec_len);
  }
  out.labels = std::move(labels);
  return out;
}

template <class T>
void TransformerModel<T>::add(const std::string& name, std::size_t rows, std::size_t cols,
                              double bound, Rng* rng, T fill) {
  ad::Parameter<T> p{name, Matrix<T>(rows, cols, fill), Matrix<T>(rows, cols)};
  if (rng) {
    for (T& v : p.value.storage()) v = static_cast<T>(rng->uniform(-bound, bound));
  }
  index_[name] = params_.size();
  params_.push_back(std::move(p));
}

template <class T>
TransformerModel<T>::TransformerModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t hidden = d * config_.ffn_multiplier;
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    Rng rng(derive_seed(seed, name));
    add(name, in, out, 1.0 / std::sqrt(static_cast<double>(in)), &rng);
  };
  auto bias = [&](const std::string& name, std::size_t width) {
    add(name, 1, width, 0.0, nullptr);
  };
  auto attention = [&](const std::string& prefix) {
    for (const char* part : {"q", "k", "v", "o"}) {
      weight(prefix + "." + part + ".w", d, d);
      bias(prefix + "." + part + ".b", d);
    }
  };
  auto norm = [&](const std::string& prefix) {
    add(prefix + ".g", 1, d, 0.0, nullptr, T(1));
    bias(prefix + ".b", d);
  };
  auto ffn = [&](const std::string& prefix) {
    weight(prefix + ".w1", d, hidden);
    bias(prefix + ".b1", hidden);
    weight(prefix + ".w2", hidden, d);
    bias(prefix + ".b2", d);
  };

  weight("proj.w", config_.input_width, d);
  bias("proj.b", d);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    attention(p + ".attn");
    norm(p + ".norm1");
    ffn(p + ".ffn");
    norm(p + ".norm2");
  }
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    attention(p + ".attn");
    norm(p + ".norm1");
    attention(p + ".xattn");
    norm(p + ".norm2");
    ffn(p + ".ffn");
    norm(p + ".norm3");
  }
  {
    // Stored 1 x d; its fan-in is d.
    Rng rng(derive_seed(seed, "head.w"));
    add("head.w", 1, d, 1.0 / std::sqrt(static_cast<double>(d)), &rng);
  }
  bias("head.b", 1);
}

template <class T>
ad::Parameter<T>& TransformerModel<T>::parameter(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return params_[it->second];
}

template <class T>
const ad::Parameter<T>& TransformerModel<T>::parameter(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return params_[it->second];
}

template <class T>
std::size_t TransformerModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
template <class U>
TransformerModel<U> TransformerModel<T>::cast() const {
  TransformerModel<U> out;
  out.config_ = config_;
  out.index_ = index_;
  for (const auto& p : params_) {
    out.params_.push_back(ad::Parameter<U>{p.name, p.value.template cast<U>(),
                                           Matrix<U>(p.value.rows(), p.value.cols())});
  }
  return out;
}

template <class T>
ad::Var TransformerModel<T>::param(ad::Tape<T>& t, const std::string& name) {
  return t.parameter(parameter(name));
}

template <class T>
ad::Var TransformerModel<T>::project(ad::Tape<T>& t, ad::Var x) {
  return ad::linear(t, x, param(t, "proj.w"), param(t, "proj.b"));
}

template <class T>
ad::Var TransformerModel<T>::attention_block(ad::Tape<T>& t, const std::string& prefix,
                                             ad::Var queries, ad::Var keys, std::size_t batch,
                                             std::size_t q_len, std::size_t k_len,
                                             const std::vector<std::uint8_t>& key_mask, Rng* rng) {
  auto lin = [&](ad::Var x, const char* part) {
    return ad::linear(t, x, param(t, prefix + "." + part + ".w"),
                      param(t, prefix + "." + part + ".b"));
  };
  ad::Var q = lin(queries, "q");
  ad::Var k = lin(keys, "k");
  ad::Var v = lin(keys, "v");
  kernels::AttentionShape shape{batch, q_len, k_len, config_.num_heads, config_.head_dim()};
  ad::Var a = ad::attention(t, q, k, v, shape, key_mask, config_.dropout, rng);
  return lin(a, "o");
}

template <class T>
ad::Var TransformerModel<T>::ffn_block(ad::Tape<T>& t, const std::string& prefix, ad::Var x,
                                       Rng* rng) {
  ad::Var h = ad::linear(t, x, param(t, prefix + ".w1"), param(t, prefix + ".b1"));
  h = ad::dropout(t, ad::relu(t, h), config_.dropout, rng);
  return ad::linear(t, h, param(t, prefix + ".w2"), param(t, prefix + ".b2"));
}

template <class T>
ad::Var TransformerModel<T>::norm(ad::Tape<T>& t, const std::string& prefix, ad::Var x) {
  return ad::layer_norm(t, x, param(t, prefix + ".g"), param(t, prefix + ".b"));
}

template <class T>
ad::Var TransformerModel<T>::encoder(ad::Tape<T>& t, ad::Var x, std::size_t batch,
                                     std::size_t len, const std::vector<std::uint8_t>& mask,
                                     Rng* rng) {
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "enc." + std::to_string(l);
    ad::Var a = attention_block(t, p + ".attn", x, x, batch, len, len, mask, rng);
    x = norm(t, p + ".norm1", ad::add(t, x, a));
    ad::Var f = ffn_block(t, p + ".ffn", x, rng);
    x = norm(t, p + ".norm2", ad::add(t, x, f));
  }
  return x;
}

template <class T>
ad::Var TransformerModel<T>::decoder(ad::Tape<T>& t, ad::Var y, ad::Var memory,
                                     std::size_t batch, std::size_t dec_len, std::size_t enc_len,
                                     const std::vector<std::uint8_t>& mask,
                                     const std::vector<std::uint8_t>& memory_mask, Rng* rng) {
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    ad::Var a = attention_block(t, p + ".attn", y, y, batch, dec_len, dec_len, mask, rng);
    y = norm(t, p + ".norm1", ad::add(t, y, a));
    ad::Var c = attention_block(t, p + ".xattn", y, memory, batch, dec_len, enc_len, memory_mask,
                                rng);
    y = norm(t, p + ".norm2", ad::add(t, y, c));
    ad::Var f = ffn_block(t, p + ".ffn", y, rng);
    y = norm(t, p + ".norm3", ad::add(t, y, f));
  }
  return y;
}

namespace {

void check_side(std::span<const std::uint8_t> mask, std::size_t batch, std::size_t len,
                const char* side) {
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t j = 0; j < len; ++j) any = any || mask[b * len + j];
    if (!any) throw InvalidArgument(std::string("all-padded ") + side + " input");
  }
}

}  // namespace

template <class T>
typename TransformerModel<T>::Forward TransformerModel<T>::forward(ad::Tape<T>& t,
                                                                   const PairBatch<T>& b,
                                                                   Rng* rng) {
  if (b.enc_tokens.cols() != config_.input_width || b.dec_tokens.cols() != config_.input_width) {
    throw InvalidArgument("token width " + std::to_string(b.enc_tokens.cols()) +
                          " does not match model input_width " +
                          std::to_string(config_.input_width));
  }
  check_side(b.enc_mask, b.batch, b.enc_len, "encoder");
  check_side(b.dec_mask, b.batch, b.dec_len, "decoder");
  Forward f;
  ad::Var xa = project(t, t.constant(b.enc_tokens));
  f.memory = encoder(t, xa, b.batch, b.enc_len, b.enc_mask, rng);
  ad::Var yb = project(t, t.constant(b.dec_tokens));
  f.decoded = decoder(t, yb, f.memory, b.batch, b.dec_len, b.enc_len, b.dec_mask, b.enc_mask, rng);
  f.scores = ad::column_scores(t, f.decoded, b.dec_mask, b.batch, b.dec_len);
  f.aggregated = ad::aggregate(t, f.decoded, f.scores, b.batch, b.dec_len);
  f.logits = ad::head_logits(t, f.aggregated, param(t, "head.w"), param(t, "head.b"));
  return f;
}

template <class T>
std::vector<T> TransformerModel<T>::logits(const PairBatch<T>& batch) {
  ad::Tape<T> t;
  Forward f = forward(t, batch, nullptr);
  return t.value(f.logits).storage();
}

template <class T>
Matrix<T> TransformerModel<T>::encode(const Matrix<T>& tokens, std::span<const std::uint8_t> mask) {
  if (tokens.cols() != config_.input_width) throw InvalidArgument("encode: token width");
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  check_side(m, 1, tokens.rows(), "encoder");
  ad::Tape<T> t;
  ad::Var x = project(t, t.constant(tokens));
  return t.value(encoder(t, x, 1, tokens.rows(), m, nullptr));
}

template <class T>
Matrix<T> TransformerModel<T>::decode(const Matrix<T>& tokens, std::span<const std::uint8_t> mask,
                                      const Matrix<T>& memory,
                                      std::span<const std::uint8_t> memory_mask) {
  if (tokens.cols() != config_.input_width) throw InvalidArgument("decode: token width");
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  std::vector<std::uint8_t> mm(memory_mask.begin(), memory_mask.end());
  check_side(m, 1, tokens.rows(), "decoder");
  check_side(mm, 1, memory.rows(), "memory");
  ad::Tape<T> t;
  ad::Var y = project(t, t.constant(tokens));
  ad::Var mem = t.constant(memory);
  return t.value(decoder(t, y, mem, 1, tokens.rows(), memory.rows(), m, mm, nullptr));
}

std::vector<double> score_columns(const DenseMatrix& x, std::span<const std::uint8_t> mask) {
  if (mask.size() != x.cols()) throw InvalidArgument("score_columns: mask size");
  ad::Tape<double> t;
  ad::Var rows = t.constant(x.transposed());
  return t.value(ad::column_scores(t, rows, mask, 1, x.cols())).storage();
}

std::vector<double> aggregate(const DenseMatrix& x, std::span<const double> s) {
  if (s.size() != x.cols()) throw InvalidArgument("aggregate: dimension mismatch");
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (s[j] == 0.0) continue;
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] += s[j] * x(i, j);
  }
  return out;
}

double predict_logit(std::span<const double> y, std::span<const double> w, double b) {
  if (y.size() != w.size()) throw InvalidArgument("predict_logit: dimension mismatch");
  double z = b;
  for (std::size_t i = 0; i < y.size(); ++i) z += w[i] * y[i];
  return z;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw InvalidArgument("bce_loss: logits/labels size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("bce_loss: label outside {0,1}");
    const double z = logits[i];
    total += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return total / static_cast<double>(logits.size());
}

template struct PairBatch<float>;
template struct PairBatch<double>;
template class TransformerModel<float>;
template class TransformerModel<double>;
template TransformerModel<double> TransformerModel<float>::cast<double>() const;
template TransformerModel<float> TransformerModel<double>::cast<float>() const;
template TransformerModel<float> TransformerModel<float>::cast<float>() const;
template TransformerModel<double> TransformerModel<double>::cast<double>() const;

}  // namespace tspe
