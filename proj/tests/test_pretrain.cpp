#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "gradcheck.hpp"
#include "smith/pretrain.hpp"
#include "smith/vocab.hpp"

using namespace smith;
using smith::test::random_mat;

namespace {

ModelConfig toy_config() {
  ModelConfig config;
  config.sent_layers = 1;
  config.doc_layers = 1;
  config.hidden_size = 8;
  config.num_heads = 2;
  config.block_len = 8;
  config.max_blocks = 4;
  config.vocab_size = 50;
  config.dropout = 0.0;
  return config;
}

SegmentedDocument doc_with_blocks(int blocks, int block_len, int seed_token = 5) {
  std::vector<std::vector<int>> sentences;
  for (int b = 0; b < blocks; ++b)
    sentences.push_back(std::vector<int>(static_cast<size_t>(block_len - 1),
                                         4 + (seed_token + b) % 40));
  SegmentedDocument doc = greedy_fill(sentences, block_len, blocks);
  doc.doc_id = "doc";
  return doc;
}

}  // namespace

TEST_CASE("mask_words with rate zero changes nothing") {
  std::mt19937_64 rng(1);
  std::vector<SegmentedDocument> docs = {doc_with_blocks(2, 8)};
  WordMaskResult result = mask_words(docs, 0.0, 50, rng);
  CHECK(result.targets.empty());
  CHECK(result.docs[0].blocks[0].token_ids == docs[0].blocks[0].token_ids);
}

TEST_CASE("mask_words never touches CLS or PAD and is reproducible") {
  std::vector<SegmentedDocument> docs = {doc_with_blocks(3, 8)};
  std::mt19937_64 rng_a(7), rng_b(7);
  WordMaskResult a = mask_words(docs, 0.4, 50, rng_a);
  WordMaskResult b = mask_words(docs, 0.4, 50, rng_b);
  REQUIRE(!a.targets.empty());
  CHECK(a.targets.size() == b.targets.size());
  for (size_t i = 0; i < a.targets.size(); ++i) {
    CHECK(a.targets[i].offset == b.targets[i].offset);
    CHECK(a.targets[i].offset >= 1);  // CLS is never masked
    const auto& block = docs[0].blocks[static_cast<size_t>(a.targets[i].block)];
    CHECK(a.targets[i].offset < block.real_count);  // PAD is never masked
  }
  for (size_t d = 0; d < docs.size(); ++d)
    for (size_t blk = 0; blk < docs[d].blocks.size(); ++blk)
      CHECK(a.docs[d].blocks[blk].token_ids == b.docs[d].blocks[blk].token_ids);
}

TEST_CASE("mask_words selection frequency approaches the rate") {
  // One long sentence: 100 eligible positions.
  SegmentedDocument doc = greedy_fill({std::vector<int>(100, 6)}, 101, 1);
  std::vector<SegmentedDocument> docs = {doc};
  std::mt19937_64 rng(13);

  std::vector<int> hits(100, 0);
  int mask_symbol = 0, unchanged = 0, random_word = 0;
  const int draws = 10000;
  for (int it = 0; it < draws; ++it) {
    WordMaskResult result = mask_words(docs, 0.15, 50, rng);
    for (const auto& t : result.targets) {
      ++hits[static_cast<size_t>(t.offset - 1)];
      const int now = result.docs[0].blocks[0].token_ids[static_cast<size_t>(t.offset)];
      if (now == Vocabulary::kMask) ++mask_symbol;
      else if (now == t.original_id) ++unchanged;
      else ++random_word;
    }
  }
  for (int h : hits) {
    const double freq = static_cast<double>(h) / draws;
    CHECK(freq > 0.13);
    CHECK(freq < 0.17);
  }
  const double total = mask_symbol + unchanged + random_word;
  CHECK(mask_symbol / total == doctest::Approx(0.8).epsilon(0.05));
  CHECK(unchanged / total == doctest::Approx(0.1).epsilon(0.2));
  CHECK(random_word / total == doctest::Approx(0.1).epsilon(0.2));
}

TEST_CASE("mask_words honors skip blocks") {
  std::vector<SegmentedDocument> docs = {doc_with_blocks(4, 8)};
  std::mt19937_64 rng(17);
  WordMaskResult result = mask_words(docs, 0.9, 50, rng, {{1, 3}});
  REQUIRE(!result.targets.empty());
  for (const auto& t : result.targets) {
    CHECK(t.block != 1);
    CHECK(t.block != 3);
  }
}

TEST_CASE("sample_masked_blocks draws without replacement") {
  std::mt19937_64 rng(19);
  auto zero = sample_masked_blocks({5}, 0, rng);
  CHECK(zero[0].empty());

  auto forced = sample_masked_blocks({2}, 2, rng);
  CHECK(forced[0] == std::vector<int>{0, 1});

  auto reduced = sample_masked_blocks({1}, 3, rng);
  CHECK(reduced[0] == std::vector<int>{0});

  for (int it = 0; it < 200; ++it) {
    auto picks = sample_masked_blocks({10, 6}, 2, rng);
    for (const auto& doc_picks : picks) {
      REQUIRE(doc_picks.size() == 2);
      CHECK(doc_picks[0] != doc_picks[1]);
      for (int k : doc_picks) {
        CHECK(k >= 0);
      }
    }
    CHECK(*std::max_element(picks[0].begin(), picks[0].end()) < 10);
    CHECK(*std::max_element(picks[1].begin(), picks[1].end()) < 6);
  }
}

TEST_CASE("dynamic masking covers every block at the expected frequency") {
  std::mt19937_64 rng(23);
  const int steps = 5000;
  std::vector<int> hits(10, 0);
  for (int it = 0; it < steps; ++it) {
    auto picks = sample_masked_blocks({10}, 2, rng);
    for (int k : picks[0]) ++hits[static_cast<size_t>(k)];
  }
  for (int h : hits) {
    const double freq = static_cast<double>(h) / steps;
    CHECK(h > 0);
    CHECK(freq > 0.15);
    CHECK(freq < 0.25);
  }
}

TEST_CASE("masked_block_loss hand-computed values") {
  Tape tape;
  std::mt19937_64 rng(3);

  // B = 1: the only candidate is the positive class.
  Mat one = random_mat(1, 4, rng);
  Tensor single = masked_block_loss(tape, tape.leaf(one, false), one);
  CHECK(single.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));

  // Uniform similarities: loss is ln B.
  Mat zeros = Mat::Zero(2, 3);
  Mat targets = random_mat(2, 3, rng);
  Tensor uniform = masked_block_loss(tape, tape.leaf(zeros, false), targets);
  CHECK(uniform.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(uniform.value()(0, 0) == doctest::Approx(0.693147).epsilon(1e-6));

  // Sim = [[2,0],[0,2]] via identity targets.
  Mat predicted(2, 2);
  predicted << 2.0, 0.0, 0.0, 2.0;
  Mat identity = Mat::Identity(2, 2);
  Tensor diag = masked_block_loss(tape, tape.leaf(predicted, false), identity);
  CHECK(diag.value()(0, 0) == doctest::Approx(0.126928).epsilon(1e-5));
  CHECK(diag.value()(0, 0) ==
        doctest::Approx(-std::log(std::exp(2.0) / (std::exp(2.0) + 1.0))).epsilon(1e-9));
}

TEST_CASE("masked_block_loss beats ln B on aligned unit rows and improves with separation") {
  Tape tape;
  Mat sharp(2, 2);
  sharp << 1.0, 0.0, 0.0, 1.0;  // orthogonal unit targets, predictions aligned
  Tensor aligned = masked_block_loss(tape, tape.leaf(sharp, false), sharp);
  CHECK(aligned.value()(0, 0) < std::log(2.0));

  Mat close(2, 2);  // correlated targets: off-diagonal similarity higher
  close << 1.0, 0.0, 0.6, 0.8;
  Tensor correlated = masked_block_loss(tape, tape.leaf(close, false), close);
  CHECK(aligned.value()(0, 0) < correlated.value()(0, 0));
}

TEST_CASE("masked_block_loss gradient matches finite differences") {
  std::mt19937_64 rng(29);
  Mat targets = random_mat(4, 5, rng);
  CHECK(smith::test::max_grad_err(
            [&](Tape& tape, const std::vector<Tensor>& in) {
              return masked_block_loss(tape, in[0], targets);
            },
            {random_mat(4, 5, rng)}, 29) < 1e-4);
}

TEST_CASE("word and block masks never overlap in a pretrain step") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 31);
  std::mt19937_64 rng(31);

  std::vector<SegmentedDocument> batch = {doc_with_blocks(4, 8, 1), doc_with_blocks(3, 8, 9)};
  AdamState adam;
  AdamConfig adam_config;
  PretrainStepConfig step_config;
  step_config.word_mask_rate = 0.5;
  // The overlap rule is enforced inside mask_words via skip lists; verify
  // through the public sampling + masking pair.
  for (int it = 0; it < 50; ++it) {
    std::vector<int> counts;
    for (const auto& d : batch) counts.push_back(d.real_block_count());
    auto blocks = sample_masked_blocks(counts, 2, rng);
    WordMaskResult words = mask_words(batch, 0.5, config.vocab_size, rng, blocks);
    for (const auto& t : words.targets) {
      const auto& skip = blocks[static_cast<size_t>(t.doc)];
      CHECK(std::find(skip.begin(), skip.end(), t.block) == skip.end());
    }
  }
  (void)adam;
  (void)adam_config;
}

TEST_CASE("word-only objective drops the block term") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 37);
  std::mt19937_64 rng(37);

  std::vector<SegmentedDocument> batch = {doc_with_blocks(3, 8, 2), doc_with_blocks(3, 8, 11)};
  PretrainStepConfig step_config;
  step_config.objective = PretrainObjective::kWordOnly;
  step_config.train_dropout = false;
  PretrainLoss loss = pretrain_eval(store, config, step_config, batch, rng);
  CHECK(loss.block_loss == 0.0);
  CHECK(loss.masked_blocks == 0);
  CHECK(loss.total == loss.word_loss);
}

TEST_CASE("untrained word loss is near ln(vocab)") {
  ModelConfig config = toy_config();  // vocab 50
  ParameterStore store;
  init_parameters(store, config, 41);
  std::mt19937_64 rng(41);

  std::vector<SegmentedDocument> batch;
  for (int d = 0; d < 8; ++d) batch.push_back(doc_with_blocks(4, 8, d * 3));
  PretrainStepConfig step_config;
  step_config.train_dropout = false;
  PretrainLoss loss = pretrain_eval(store, config, step_config, batch, rng);
  CHECK(loss.word_loss == doctest::Approx(std::log(50.0)).epsilon(0.5 / std::log(50.0)));
  CHECK(loss.masked_words > 0);
}

TEST_CASE("a few pretrain steps reduce the joint loss") {
  ModelConfig config = toy_config();
  config.hidden_size = 16;
  config.num_heads = 2;
  ParameterStore store;
  init_parameters(store, config, 43);
  std::mt19937_64 rng(43);

  std::vector<SegmentedDocument> batch;
  for (int d = 0; d < 6; ++d) batch.push_back(doc_with_blocks(4, 8, d * 5));

  AdamConfig adam_config;
  adam_config.lr = 2e-3;
  AdamState adam;
  PretrainStepConfig step_config;
  step_config.train_dropout = false;

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 30; ++step) {
    PretrainLoss loss = pretrain_step(store, adam, adam_config, config, step_config, batch, rng);
    if (step == 0) first = loss.total;
    last = loss.total;
  }
  CHECK(last < first);
}

TEST_CASE("removing every mask reproduces smith_forward exactly") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 47);
  std::mt19937_64 rng(47);

  SegmentedDocument doc = doc_with_blocks(3, 8, 4);

  // Pretrain-style forward with no masks: sentence encodes, document stack,
  // no replacements.
  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  std::vector<Tensor> reps;
  for (int b = 0; b < doc.real_block_count(); ++b)
    reps.push_back(encode_sentence_block(tape, model, doc.blocks[static_cast<size_t>(b)])
                       .block_rep);
  std::vector<std::uint8_t> mask(reps.size(), 1);
  DocEncoding enc = encode_document(tape, model, concat_rows(reps), mask);
  Mat doc_rep = enc.doc_rep.value();

  Mat direct = smith_forward(tape, model, doc).value();
  CHECK((doc_rep - direct).cwiseAbs().maxCoeff() == 0.0);

  // And the full pretrain path with rate 0 / no masked blocks leaves inputs
  // untouched.
  PretrainStepConfig step_config;
  step_config.word_mask_rate = 0.0;
  step_config.masked_blocks_per_doc = 0;
  step_config.train_dropout = false;
  PretrainLoss loss = pretrain_eval(store, config, step_config, {doc}, rng);
  CHECK(loss.masked_words == 0);
  CHECK(loss.masked_blocks == 0);
  CHECK(loss.total == 0.0);
}
