#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tspe/encoding.hpp"
#include "tspe/matrix.hpp"
#include "tspe/model.hpp"

namespace tspe {

/// Named tensor with either 32- or 64-bit payload.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  std::string dtype() const { return data.index() == 0 ? "f32" : "f64"; }
  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

/// Container layout: "TSPE", version byte 0x01, u32 LE header length, UTF-8
/// JSON header {format_version, created, config, tensors: [{name, shape,
/// dtype}]}, then raw LE payloads in header order.
class Checkpoint {
 public:
  static constexpr std::uint8_t kVersion = 1;

  nlohmann::json config = nlohmann::json::object();
  std::string created;
  std::vector<Tensor> tensors;

  Checkpoint();

  void add(const std::string& name, const Matrix<float>& m);
  void add(const std::string& name, const Matrix<double>& m);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  /// 2-D tensor as a matrix; 1-D tensors become a single row.
  DenseMatrix matrix(const std::string& name) const;
  Matrix<float> matrix_f32(const std::string& name) const;

  std::string encode() const;
  static Checkpoint decode(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint&) const = default;
};

/// Timestamp for artifacts: SOURCE_DATE_EPOCH when set, otherwise the epoch,
/// so repeated runs stay byte-identical.
std::string artifact_timestamp();

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void add_model(Checkpoint& ckpt, const TransformerModel<float>& model);
/// Rebuilds a model of shape `config` from the tensors in `ckpt`.
TransformerModel<float> load_model(const Checkpoint& ckpt, const ModelConfig& config);

/// Tensors "M", "LPE", "GPE", "LPE.eigenvalues", "GPE.singular_values" and
/// the composed "SPE".
void add_encodings(Checkpoint& ckpt, const EncodingBundle& bundle);
EncodingBundle load_encodings(const Checkpoint& ckpt);

}  // namespace tspe
