#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smith/cli.hpp"

using namespace smith;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / "smith_cli_test";
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "smith");
  return run_command(args);
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  out << contents;
}

}  // namespace

TEST_CASE("unknown subcommands and missing flags exit with 2") {
  CHECK(run({"definitely-not-a-command"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"pretrain"}) == 2);                       // missing required flags
  CHECK(run({"build-vocab", "--corpus", "x"}) == 2);   // missing --out
  CHECK(run({"segment", "--bogus-flag", "1"}) == 2);
}

TEST_CASE("missing input files exit with 1") {
  TempDir dir;
  CHECK(run({"build-vocab", "--corpus", dir.file("absent.jsonl"), "--out",
             dir.file("v.txt")}) == 1);
  CHECK(run({"eval", "--pairs", dir.file("absent.jsonl"), "--checkpoint",
             dir.file("absent.ckpt")}) == 1);
}

TEST_CASE("fixture, vocabulary and segmentation flow") {
  TempDir dir;
  const std::string pairs = dir.file("pairs.jsonl");
  const std::string docs = dir.file("docs.jsonl");
  const std::string vocab = dir.file("vocab.txt");
  const std::string segmented = dir.file("segmented.jsonl");

  CHECK(run({"generate-fixture", "--out", pairs, "--docs-out", docs, "--n-pairs", "6",
             "--topics", "3", "--doc-len", "30", "--seed", "5"}) == 0);
  CHECK(std::filesystem::exists(pairs));
  CHECK(std::filesystem::exists(docs));

  CHECK(run({"build-vocab", "--corpus", docs, "--out", vocab, "--max-size", "500",
             "--min-count", "1"}) == 0);

  CHECK(run({"segment", "--docs", docs, "--vocab", vocab, "--ls", "12", "--ld", "4",
             "--out", segmented}) == 0);

  std::ifstream in(segmented);
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    CHECK(j.contains("doc_id"));
    REQUIRE(j.at("blocks").is_array());
    CHECK(j.at("blocks").size() == 4);
    for (const auto& block : j.at("blocks")) CHECK(block.size() == 12);
    CHECK(j.at("block_mask").size() == 4);
    ++lines;
  }
  CHECK(lines == 12);
}

TEST_CASE("fixture output is byte-identical per seed") {
  TempDir dir;
  const std::string a = dir.file("a.jsonl");
  const std::string b = dir.file("b.jsonl");
  CHECK(run({"generate-fixture", "--out", a, "--n-pairs", "5", "--seed", "9"}) == 0);
  CHECK(run({"generate-fixture", "--out", b, "--n-pairs", "5", "--seed", "9"}) == 0);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
  CHECK(!ca.empty());
}

TEST_CASE("profile-attention verifies and reports the budget") {
  CHECK(run({"profile-attention", "--n", "64", "--ls", "8", "--b", "1", "--a", "1",
             "--l", "1"}) == 0);
  CHECK(run({"profile-attention", "--n", "2048", "--ls", "32", "--b", "32", "--a", "4",
             "--l", "3"}) == 0);
}

TEST_CASE("train, checkpoint, eval and embed round trip") {
  TempDir dir;
  const std::string pairs = dir.file("pairs.jsonl");
  const std::string docs = dir.file("docs.jsonl");
  const std::string vocab = dir.file("vocab.txt");
  const std::string config = dir.file("model.cfg");
  const std::string pre = dir.file("pre.ckpt");
  const std::string tuned = dir.file("tuned.ckpt");
  const std::string embeddings = dir.file("emb.jsonl");

  REQUIRE(run({"generate-fixture", "--out", pairs, "--docs-out", docs, "--n-pairs", "8",
               "--topics", "3", "--doc-len", "30", "--seed", "11"}) == 0);
  REQUIRE(run({"build-vocab", "--corpus", docs, "--out", vocab}) == 0);
  write_file(config,
             "L1=1\nL2=1\nH=8\nA=2\nLs=10\nLd=4\nvocab_size=0\ncombine_mode=normal\n"
             "dropout=0.1\nattn_combine_dim=0\n");

  REQUIRE(run({"pretrain", "--corpus", docs, "--vocab", vocab, "--config", config,
               "--steps", "3", "--batch-size", "4", "--seed", "2", "--lr", "1e-3",
               "--checkpoint-out", pre, "--log-every", "0"}) == 0);
  REQUIRE(std::filesystem::exists(pre));

  REQUIRE(run({"finetune", "--pairs", pairs, "--init-checkpoint", pre, "--steps", "3",
               "--batch-size", "4", "--seed", "2", "--lr", "1e-3", "--checkpoint-out",
               tuned, "--log-every", "0"}) == 0);

  CHECK(run({"eval", "--pairs", pairs, "--checkpoint", tuned}) == 0);
  CHECK(run({"embed", "--docs", docs, "--checkpoint", tuned, "--out", embeddings}) == 0);

  std::ifstream in(embeddings);
  std::string line;
  size_t lines = 0;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    CHECK(j.at("vector").size() == 8);
    ++lines;
  }
  CHECK(lines == 16);
}

TEST_CASE("finetune without a parameter source exits with 1") {
  TempDir dir;
  const std::string pairs = dir.file("pairs.jsonl");
  REQUIRE(run({"generate-fixture", "--out", pairs, "--n-pairs", "4"}) == 0);
  CHECK(run({"finetune", "--pairs", pairs, "--steps", "1"}) == 1);
}
