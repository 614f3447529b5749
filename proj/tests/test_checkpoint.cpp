#include "doctest.h"

#include <cstdlib>
#include <filesystem>

#include "tspe/checkpoint.hpp"
#include "tspe/config.hpp"
#include "tspe/error.hpp"

using namespace tspe;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tspe_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("container layout") {
  Checkpoint c;
  c.created = "2020-01-01T00:00:00Z";
  c.config = {{"seed", 3}};
  c.add("a", Matrix<float>(2, 3, {1, 2, 3, 4, 5, 6}));
  c.add("b", DenseMatrix(1, 2, {0.5, -0.25}));
  const std::string bytes = c.encode();
  REQUIRE(bytes.size() > 9);
  CHECK(bytes.substr(0, 4) == "TSPE");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i) hlen |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[5 + i])) << (8 * i);
  auto header = nlohmann::json::parse(bytes.substr(9, hlen));
  CHECK(header["format_version"] == 1);
  CHECK(header["created"] == "2020-01-01T00:00:00Z");
  CHECK(header["config"]["seed"] == 3);
  CHECK(header["tensors"][0]["name"] == "a");
  CHECK(header["tensors"][0]["dtype"] == "f32");
  CHECK(header["tensors"][0]["shape"] == nlohmann::json::array({2, 3}));
  CHECK(header["tensors"][1]["dtype"] == "f64");
  CHECK(bytes.size() == 9 + hlen + 6 * 4 + 2 * 8);
  // Little-endian float 1.0f opens the payload.
  CHECK(bytes.substr(9 + hlen, 4) == std::string("\x00\x00\x80\x3f", 4));
}

TEST_CASE("round trip is lossless and byte-identical") {
  Checkpoint c;
  c.config = {{"k", "v"}};
  Rng rng(1);
  DenseMatrix m(5, 4);
  for (double& v : m.storage()) v = rng.uniform(-1e6, 1e6);
  c.add("m", m);
  c.add("f", m.cast<float>());
  const std::string bytes = c.encode();
  auto back = Checkpoint::decode(bytes);
  CHECK(back == c);
  CHECK(back.encode() == bytes);
  CHECK(back.matrix("m") == m);
  CHECK(back.matrix_f32("f") == m.cast<float>());

  auto dir = temp_dir("ckpt");
  c.save(dir / "x.tspe");
  CHECK(Checkpoint::load(dir / "x.tspe") == c);
  CHECK(!fs::exists(dir / "x.tspe.tmp"));
  CHECK(read_file(dir / "x.tspe") == bytes);
}

TEST_CASE("decode rejects malformed containers") {
  Checkpoint c;
  c.add("a", DenseMatrix(2, 2, 1.0));
  const std::string bytes = c.encode();
  CHECK_THROWS_WITH_AS(Checkpoint::decode("XSPE" + bytes.substr(4)), doctest::Contains("magic"), IoError);
  std::string v2 = bytes;
  v2[4] = 2;
  CHECK_THROWS_WITH_AS(Checkpoint::decode(v2), doctest::Contains("version"), IoError);
  CHECK_THROWS_AS(Checkpoint::decode(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(Checkpoint::decode(bytes + "x"), IoError);
  CHECK_THROWS_AS(Checkpoint::decode(bytes.substr(0, 7)), IoError);
  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/file.tspe"), IoError);
  CHECK_THROWS_AS(c.add("a", DenseMatrix(1, 1)), InvalidArgument);
  CHECK_THROWS_AS(c.get("zz"), InvalidArgument);
}

TEST_CASE("timestamp honours SOURCE_DATE_EPOCH") {
  ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
  CHECK(artifact_timestamp() == "1970-01-02T00:00:00Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
  CHECK(artifact_timestamp() == "1970-01-01T00:00:00Z");
}

TEST_CASE("model and encodings round trip") {
  ModelConfig mc;
  mc.num_layers = 1;
  mc.num_heads = 2;
  mc.d_model = 4;
  mc.input_width = 3;
  TransformerModel<float> model(mc, 5);
  Checkpoint c;
  add_model(c, model);
  CHECK(c.contains("proj.w"));
  CHECK(c.contains("head.b"));
  auto back = load_model(Checkpoint::decode(c.encode()), mc);
  for (std::size_t i = 0; i < model.parameters().size(); ++i)
    CHECK(back.parameters()[i].value == model.parameters()[i].value);
  mc.d_model = 8;
  CHECK_THROWS_AS(load_model(c, mc), InvalidArgument);

  EncodingBundle b;
  b.m = DenseMatrix(3, 2, {1, 2, 3, 4, 5, 6});
  b.lpe.vectors = DenseMatrix(3, 2, 0.5);
  b.lpe.eigenvalues = {0.3, 0.9};
  b.gpe.vectors = DenseMatrix(3, 1, {7, 8, 9});
  b.gpe.singular_values = {2.0};
  Checkpoint e;
  add_encodings(e, b);
  CHECK(e.contains("SPE"));
  auto eb = load_encodings(Checkpoint::decode(e.encode()));
  CHECK(eb.m == b.m);
  CHECK(eb.lpe.vectors == b.lpe.vectors);
  CHECK(eb.lpe.eigenvalues == b.lpe.eigenvalues);
  CHECK(eb.gpe.vectors == b.gpe.vectors);
  CHECK(eb.input(PeMode::SPE) == b.input(PeMode::SPE));
}

TEST_CASE("run config: JSON round trip, overrides and validation") {
  RunConfig c;
  c.seed = 9;
  c.set("walk_p", "0.5");
  c.set("lpe_sign_flip", "true");
  c.set("pe", "lpe");
  c.set("mode", "rr1");
  auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.walk.p == 0.5);
  CHECK(back.model.lpe_sign_flip);
  CHECK(back.pe == PeMode::LPE);
  CHECK(back.mode == ThresholdMode::RR1);

  CHECK_THROWS_AS(RunConfig::from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"seed", "x"}}), ConfigError);
  CHECK_THROWS_AS(c.set("seed", "-3"), ConfigError);
  CHECK_THROWS_AS(c.set("nope", "1"), ConfigError);

  RunConfig d;
  d.set("embedding_dim", "32");
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("lpe_dim"), ConfigError);
  d.set("lpe_dim", "32");
  CHECK_NOTHROW(d.validate());

  // Defaults follow the published configuration.
  RunConfig t;
  CHECK(t.train.learning_rate == 1e-4);
  CHECK(t.train.batch_size == 20);
  CHECK(t.train.valid_fraction == 0.1);
  CHECK(t.model.num_layers == 3);
  CHECK(t.model.num_heads == 8);
  CHECK(t.model.dropout == 0.2);
  CHECK(t.lpe_dim == 64);
  CHECK(t.gpe_dim == 8);
  CHECK(t.folds == 10);
}
