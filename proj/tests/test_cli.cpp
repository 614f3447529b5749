#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>

#include "tspe/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kSmall =
    " --synth-num-nodes 120 --synth-num-subgraphs 12 --synth-module-size 6 --synth-num-pairs 30"
    " --walk-length 10 --walks-per-node 2 --embedding-dim 8 --lpe-dim 8 --gpe-dim 2"
    " --num-layers 1 --num-heads 2 --d-model 8 --max-epochs 2 --batch-size 6 --folds 3";

int run(const fs::path& dir, const std::string& args, const std::string& log = "log.txt") {
  const std::string cmd = "cd '" + dir.string() + "' && '" + TSPE_CLI_PATH + "' " + args + " > " +
                          log + " 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) { return tspe::read_file(p); }

}  // namespace

TEST_CASE("cli: full pipeline on a small synthetic dataset") {
  auto dir = fs::temp_directory_path() / "tspe_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = " --graph data/graph.tsv --catalog data/catalog.tsv --pairs data/pairs.tsv";

  REQUIRE(run(dir, "synth --out data" + kSmall) == 0);
  CHECK(fs::exists(dir / "data" / "graph.tsv"));
  CHECK(fs::exists(dir / "data" / "pairs.tsv"));

  REQUIRE(run(dir, "embed --graph data/graph.tsv --out emb.tspe" + kSmall) == 0);
  auto emb = tspe::Checkpoint::load(dir / "emb.tspe");
  CHECK(emb.get("M").shape == std::vector<std::size_t>{120, 8});

  REQUIRE(run(dir, "pe --embeddings emb.tspe --out enc.tspe" + data + kSmall) == 0);
  auto enc = tspe::Checkpoint::load(dir / "enc.tspe");
  CHECK(enc.get("SPE").shape == std::vector<std::size_t>{120, 10});

  REQUIRE(run(dir, "train --encodings enc.tspe --out model.tspe" + data + kSmall) == 0);
  CHECK(fs::exists(dir / "model.tspe.log.tsv"));
  REQUIRE(run(dir, "eval --checkpoint model.tspe --out eval.json" + data) == 0);
  auto ev = nlohmann::json::parse(slurp(dir / "eval.json"));
  CHECK(ev["folds"].size() == 1);

  REQUIRE(run(dir, "cv --encodings enc.tspe --out cv.json --drop-worst-fold 1" + data + kSmall) == 0);
  auto cv = nlohmann::json::parse(slurp(dir / "cv.json"));
  CHECK(cv["folds"].size() == 3);
  CHECK(cv.contains("drop_worst"));

  // A bare boolean flag means true.
  REQUIRE(run(dir, "cv --encodings enc.tspe --ablation --out ablation.json" + data + kSmall) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "ablation.json")).size() == 4);

  // A config file supplies defaults; flags override it.
  tspe::write_file_atomic(dir / "cfg.json", R"({"seed": 4, "synth_num_pairs": 24})");
  REQUIRE(run(dir, "--config cfg.json synth --out data2 --seed 5" + kSmall.substr(0, kSmall.find(" --walk"))) == 0);
  CHECK(slurp(dir / "data2" / "pairs.tsv") != slurp(dir / "data" / "pairs.tsv"));
}

TEST_CASE("cli: errors exit nonzero with a one-line message") {
  auto dir = fs::temp_directory_path() / "tspe_cli_err";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK(run(dir, "embed --graph missing.tsv") == 1);
  CHECK(slurp(dir / "log.txt").rfind("error: io:", 0) == 0);
  CHECK(run(dir, "pe --embedding-dim 16 --lpe-dim 8 --graph g --catalog c") == 1);
  CHECK(slurp(dir / "log.txt").find("error: config:") == 0);
  CHECK(run(dir, "bogus") == 2);
  CHECK(run(dir, "") == 2);
  tspe::write_file_atomic(dir / "bad.json", R"({"unknown_key": 1})");
  CHECK(run(dir, "--config bad.json synth") == 1);
}
