#include "tspe/checkpoint.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "tspe/error.hpp"

namespace tspe {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'P', 'E'};

template <class T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

template <class T>
Tensor make_tensor(const std::string& name, const Matrix<T>& m) {
  Tensor t;
  t.name = name;
  t.shape = {m.rows(), m.cols()};
  t.data = std::vector<T>(m.storage().begin(), m.storage().end());
  return t;
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

Checkpoint::Checkpoint() : created(artifact_timestamp()) {}

void Checkpoint::add(const std::string& name, const Matrix<float>& m) {
  if (contains(name)) throw InvalidArgument("duplicate tensor '" + name + "'");
  tensors.push_back(make_tensor(name, m));
}

void Checkpoint::add(const std::string& name, const Matrix<double>& m) {
  if (contains(name)) throw InvalidArgument("duplicate tensor '" + name + "'");
  tensors.push_back(make_tensor(name, m));
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("checkpoint has no tensor '" + name + "'");
}

DenseMatrix Checkpoint::matrix(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.shape.empty() || t.shape.size() > 2) {
    throw InvalidArgument("tensor '" + name + "' is not 1-D or 2-D");
  }
  const std::size_t rows = t.shape.size() == 2 ? t.shape[0] : 1;
  const std::size_t cols = t.shape.back();
  DenseMatrix m(rows, cols);
  std::visit([&](const auto& v) { std::copy(v.begin(), v.end(), m.storage().begin()); }, t.data);
  return m;
}

Matrix<float> Checkpoint::matrix_f32(const std::string& name) const {
  return matrix(name).cast<float>();
}

std::string Checkpoint::encode() const {
  nlohmann::json header;
  header["format_version"] = kVersion;
  header["created"] = created;
  header["config"] = config;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    if (t.element_count() != std::visit([](const auto& v) { return v.size(); }, t.data)) {
      throw InvalidArgument("tensor '" + t.name + "' shape does not match its data");
    }
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", t.dtype()}});
  }
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& t : tensors) {
    std::visit([&](const auto& v) { for (auto x : v) put_le(out, x); }, t.data);
  }
  return out;
}

Checkpoint Checkpoint::decode(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 9 || std::memcmp(p, kMagic, 4) != 0) {
    throw IoError("not a TSPE container (bad magic)");
  }
  if (p[4] != kVersion) {
    throw IoError("unsupported container version " + std::to_string(p[4]));
  }
  const std::uint32_t hlen = get_le<std::uint32_t>(p + 5);
  if (bytes.size() < 9 + static_cast<std::size_t>(hlen)) throw IoError("truncated container header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(9, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("container header is not valid JSON: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.created = header.at("created").get<std::string>();
    ckpt.config = header.at("config");
    std::size_t offset = 9 + hlen;
    for (const auto& entry : header.at("tensors")) {
      Tensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const std::string dtype = entry.at("dtype").get<std::string>();
      const std::size_t n = t.element_count();
      const std::size_t width = dtype == "f32" ? 4 : dtype == "f64" ? 8 : 0;
      if (width == 0) throw IoError("tensor '" + t.name + "' has unknown dtype " + dtype);
      if (bytes.size() < offset + n * width) throw IoError("truncated payload for '" + t.name + "'");
      if (width == 4) {
        std::vector<float> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = get_le<float>(p + offset + 4 * i);
        t.data = std::move(v);
      } else {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = get_le<double>(p + offset + 8 * i);
        t.data = std::move(v);
      }
      offset += n * width;
      ckpt.tensors.push_back(std::move(t));
    }
    if (offset != bytes.size()) throw IoError("trailing bytes after last payload");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed container header: ") + e.what());
  }
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, encode()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return decode(read_file(path)); }

std::string artifact_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::atoll(env));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void add_model(Checkpoint& ckpt, const TransformerModel<float>& model) {
  for (const auto& p : model.parameters()) ckpt.add(p.name, p.value);
}

TransformerModel<float> load_model(const Checkpoint& ckpt, const ModelConfig& config) {
  TransformerModel<float> model(config, 0);
  for (auto& p : model.parameters()) {
    const Tensor& t = ckpt.get(p.name);
    if (t.shape.size() != 2 || t.shape[0] != p.value.rows() || t.shape[1] != p.value.cols()) {
      throw InvalidArgument("tensor '" + p.name + "' has the wrong shape for this config");
    }
    p.value = ckpt.matrix_f32(p.name);
  }
  return model;
}

namespace {

DenseMatrix row_of(const std::vector<double>& v) {
  DenseMatrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.storage().begin());
  return m;
}

}  // namespace

void add_encodings(Checkpoint& ckpt, const EncodingBundle& bundle) {
  ckpt.add("M", bundle.m);
  ckpt.add("LPE", bundle.lpe.vectors);
  ckpt.add("GPE", bundle.gpe.vectors);
  ckpt.add("LPE.eigenvalues", row_of(bundle.lpe.eigenvalues));
  ckpt.add("GPE.singular_values", row_of(bundle.gpe.singular_values));
  ckpt.add("SPE", bundle.input(PeMode::SPE));
}

EncodingBundle load_encodings(const Checkpoint& ckpt) {
  EncodingBundle b;
  b.m = ckpt.matrix("M");
  b.lpe.vectors = ckpt.matrix("LPE");
  b.gpe.vectors = ckpt.matrix("GPE");
  const auto ev = ckpt.matrix("LPE.eigenvalues");
  b.lpe.eigenvalues.assign(ev.storage().begin(), ev.storage().end());
  const auto sv = ckpt.matrix("GPE.singular_values");
  b.gpe.singular_values.assign(sv.storage().begin(), sv.storage().end());
  if (b.m.rows() != b.lpe.vectors.rows() || b.m.rows() != b.gpe.vectors.rows()) {
    throw InvalidArgument("encoding container has inconsistent row counts");
  }
  return b;
}

}  // namespace tspe
