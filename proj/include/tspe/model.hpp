#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tspe/autodiff.hpp"
#include "tspe/matrix.hpp"
#include "tspe/rng.hpp"

namespace tspe {

struct ModelConfig {
  std::size_t num_layers = 3;
  std::size_t num_heads = 8;
  std::size_t d_model = 64;
  std::size_t ffn_multiplier = 2;
  double dropout = 0.2;
  std::size_t input_width = 72;
  bool lpe_sign_flip = false;

  std::size_t head_dim() const { return d_model / num_heads; }
  void validate() const;
};

/// One padded batch of subgraph pairs. Side A feeds the encoder, side B the
/// decoder. Token rows are laid out as `batch` blocks of `*_len` rows; padded
/// rows are zero and have a false mask.
template <class T>
struct PairBatch {
  std::size_t batch = 0;
  std::size_t enc_len = 0;
  std::size_t dec_len = 0;
  Matrix<T> enc_tokens;
  Matrix<T> dec_tokens;
  std::vector<std::uint8_t> enc_mask;
  std::vector<std::uint8_t> dec_mask;
  std::vector<int> labels;
  std::vector<std::size_t> pair_index;  // dataset index of each pair

  /// Builds a batch from per-pair token matrices, padding to the longest side.
  static PairBatch from_pairs(std::span<const Matrix<T>> side_a, std::span<const Matrix<T>> side_b,
                              std::vector<int> labels);
};

/// Transformer parameters with stable names (proj.*, enc.{l}.*, dec.{l}.*,
/// head.*). Weights are stored input-major (in x out).
template <class T>
class TransformerModel {
 public:
  TransformerModel() = default;
  /// Fan-in scaled uniform weights, zero biases, unit layer-norm gains.
  TransformerModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<ad::Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<ad::Parameter<T>>& parameters() const noexcept { return params_; }
  ad::Parameter<T>& parameter(const std::string& name);
  const ad::Parameter<T>& parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  template <class U>
  TransformerModel<U> cast() const;

  struct Forward {
    ad::Var logits;        // batch x 1
    ad::Var memory;        // encoder output rows
    ad::Var decoded;       // decoder output rows
    ad::Var scores;        // batch x dec_len
    ad::Var aggregated;    // batch x d_model
  };

  /// Records the full pair forward pass on `tape`. Dropout is active only
  /// when `rng` is non-null.
  Forward forward(ad::Tape<T>& tape, const PairBatch<T>& batch, Rng* rng = nullptr);

  /// Inference: logits for every pair in the batch.
  std::vector<T> logits(const PairBatch<T>& batch);

  /// Encoder output for one subgraph (rows = tokens).
  Matrix<T> encode(const Matrix<T>& tokens, std::span<const std::uint8_t> mask);
  /// Decoder output for one pair given encoder memory.
  Matrix<T> decode(const Matrix<T>& tokens, std::span<const std::uint8_t> mask,
                   const Matrix<T>& memory, std::span<const std::uint8_t> memory_mask);

 private:
  template <class U>
  friend class TransformerModel;

  void add(const std::string& name, std::size_t rows, std::size_t cols, double bound, Rng* rng,
           T fill = T(0));
  ad::Var param(ad::Tape<T>& t, const std::string& name);
  ad::Var project(ad::Tape<T>& t, ad::Var x);
  ad::Var attention_block(ad::Tape<T>& t, const std::string& prefix, ad::Var queries,
                          ad::Var keys, std::size_t batch, std::size_t q_len, std::size_t k_len,
                          const std::vector<std::uint8_t>& key_mask, Rng* rng);
  ad::Var ffn_block(ad::Tape<T>& t, const std::string& prefix, ad::Var x, Rng* rng);
  ad::Var norm(ad::Tape<T>& t, const std::string& prefix, ad::Var x);
  ad::Var encoder(ad::Tape<T>& t, ad::Var x, std::size_t batch, std::size_t len,
                  const std::vector<std::uint8_t>& mask, Rng* rng);
  ad::Var decoder(ad::Tape<T>& t, ad::Var y, ad::Var memory, std::size_t batch,
                  std::size_t dec_len, std::size_t enc_len, const std::vector<std::uint8_t>& mask,
                  const std::vector<std::uint8_t>& memory_mask, Rng* rng);

  ModelConfig config_;
  std::vector<ad::Parameter<T>> params_;
  std::map<std::string, std::size_t> index_;
};

// Value-level forms of the scoring head, on the interaction matrix X
// (m x n, one column per decoder node).

/// s_j = softmax over unmasked j of ||X[:, j]||^2; masked entries are 0.
std::vector<double> score_columns(const DenseMatrix& x, std::span<const std::uint8_t> mask);
/// y' = sum_j s_j X[:, j].
std::vector<double> aggregate(const DenseMatrix& x, std::span<const double> s);
/// w . y' + b (w is 1 x m).
double predict_logit(std::span<const double> y, std::span<const double> w, double b);
double sigmoid(double z);
/// Mean BCE in stable logit form.
double bce_loss(std::span<const double> logits, std::span<const int> labels);

}  // namespace tspe
