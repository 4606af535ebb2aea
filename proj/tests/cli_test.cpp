#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "acosqe/cli.hpp"

using namespace acosqe;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "acosqe_cli_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("usage errors exit with code one") {
  CHECK(run_cli({"no-such-command"}) == 1);
  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"eval"}) == 1);  // missing required options
}

TEST_CASE("missing files exit with code two") {
  CHECK(run_cli({"stats", "/nonexistent/nope.jsonl"}) == 2);
  CHECK(run_cli({"train", "/nonexistent/nope.jsonl", "--out", "/tmp/x.ckpt"}) == 2);
}

TEST_CASE("synth then stats round trips on disk") {
  TempDir tmp;
  CHECK(run_cli({"synth", tmp.str("corpus"), "--seed", "3", "--train-sentences",
                 "40", "--test-sentences", "10"}) == 0);
  CHECK(fs::exists(tmp.path / "corpus" / "train.jsonl"));
  CHECK(fs::exists(tmp.path / "corpus" / "test.jsonl"));
  CHECK(fs::exists(tmp.path / "corpus" / "ledger.json"));
  CHECK(run_cli({"stats", (tmp.path / "corpus" / "train.jsonl").string()}) == 0);
}

TEST_CASE("train, predict and eval run end to end on a tiny corpus") {
  TempDir tmp;
  REQUIRE(run_cli({"synth", tmp.str("corpus"), "--seed", "3", "--train-sentences",
                   "24", "--test-sentences", "8"}) == 0);
  // a deliberately small architecture so the test stays quick
  {
    std::ofstream cfg(tmp.str("tiny.cfg"));
    cfg << "embedding_dim=6\nhidden_lstm=4\nhidden_gru=4\nk_max=3\n"
           "max_len=24\node_state=3\node_hidden=5\node_steps=2\n"
           "epochs=2\nbatch_size=8\nlearning_rate=2e-3\nuse_hints=false\n";
  }
  std::string train_jsonl = (tmp.path / "corpus" / "train.jsonl").string();
  std::string test_jsonl = (tmp.path / "corpus" / "test.jsonl").string();
  REQUIRE(run_cli({"train", train_jsonl, "--config", tmp.str("tiny.cfg"),
                   "--out", tmp.str("model.ckpt")}) == 0);
  REQUIRE(fs::exists(tmp.str("model.ckpt")));

  CHECK(run_cli({"predict", test_jsonl, "--file", "--model",
                 tmp.str("model.ckpt")}) == 0);
  CHECK(run_cli({"predict", "the view is great", "--model",
                 tmp.str("model.ckpt")}) == 0);
  CHECK(run_cli({"eval", test_jsonl, "--model", tmp.str("model.ckpt")}) == 0);
  CHECK(run_cli({"eval", test_jsonl, "--model", tmp.str("model.ckpt"),
                 "--subtask", "acos"}) == 0);
  CHECK(run_cli({"eval", test_jsonl, "--model", tmp.str("model.ckpt"),
                 "--subtask", "bogus"}) != 0);
}

TEST_CASE("aux training, generation and pruning drive the hint model") {
  TempDir tmp;
  REQUIRE(run_cli({"synth", tmp.str("corpus"), "--seed", "4", "--train-sentences",
                   "16", "--test-sentences", "4"}) == 0);
  {
    std::ofstream cfg(tmp.str("aux.cfg"));
    cfg << "aux_layers=1\naux_dim=8\naux_ffn=16\naux_epochs=1\n"
           "aux_batch_size=4\naux_learning_rate=2e-3\n";
  }
  std::string train_jsonl = (tmp.path / "corpus" / "train.jsonl").string();
  REQUIRE(run_cli({"train-aux", train_jsonl, "--config", tmp.str("aux.cfg"),
                   "--out", tmp.str("aux.ckpt")}) == 0);
  REQUIRE(fs::exists(tmp.str("aux.ckpt")));

  CHECK(run_cli({"generate", "the view is great", "--model",
                 tmp.str("aux.ckpt")}) == 0);
  CHECK(run_cli({"prune", "--model", tmp.str("aux.ckpt"), "--data", train_jsonl,
                 "--calib", "0-7", "--sparsity", "0.5", "--out",
                 tmp.str("aux_pruned.ckpt")}) == 0);
  CHECK(fs::exists(tmp.str("aux_pruned.ckpt")));
}

TEST_CASE("config typos are reported as data errors") {
  TempDir tmp;
  {
    std::ofstream cfg(tmp.str("bad.cfg"));
    cfg << "embeding_dim=6\n";  // misspelled key
  }
  std::ofstream(tmp.str("empty.jsonl")).close();
  CHECK(run_cli({"train", tmp.str("empty.jsonl"), "--config", tmp.str("bad.cfg"),
                 "--out", tmp.str("x.ckpt")}) == 2);
}
