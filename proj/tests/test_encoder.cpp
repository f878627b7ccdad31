#include <doctest.h>

#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "reference_model.hpp"
#include "smith/encoder.hpp"
#include "smith/matcher.hpp"

using namespace smith;
using smith::test::random_mat;

namespace {

ModelConfig toy_config(CombineMode mode = CombineMode::kNormal) {
  ModelConfig config;
  config.sent_layers = 1;
  config.doc_layers = 1;
  config.hidden_size = 8;
  config.num_heads = 2;
  config.block_len = 8;
  config.max_blocks = 4;
  config.vocab_size = 50;
  config.dropout = 0.0;
  config.combine_mode = mode;
  return config;
}

SentenceBlock block_of(const std::vector<int>& ids, int block_len) {
  SentenceBlock b;
  b.token_ids.assign(static_cast<size_t>(block_len), Vocabulary::kPad);
  b.token_mask.assign(static_cast<size_t>(block_len), 0);
  b.token_ids[0] = Vocabulary::kCls;
  b.token_mask[0] = 1;
  b.real_count = 1;
  for (int id : ids) {
    b.token_ids[static_cast<size_t>(b.real_count)] = id;
    b.token_mask[static_cast<size_t>(b.real_count)] = 1;
    ++b.real_count;
  }
  return b;
}

SegmentedDocument doc_of(const std::vector<std::vector<int>>& blocks, const ModelConfig& c) {
  SegmentedDocument doc;
  doc.doc_id = "test";
  SentenceBlock empty;
  empty.token_ids.assign(static_cast<size_t>(c.block_len), Vocabulary::kPad);
  empty.token_mask.assign(static_cast<size_t>(c.block_len), 0);
  empty.real_count = 0;
  doc.blocks.assign(static_cast<size_t>(c.max_blocks), empty);
  doc.block_mask.assign(static_cast<size_t>(c.max_blocks), 0);
  for (size_t i = 0; i < blocks.size(); ++i) {
    doc.blocks[i] = block_of(blocks[i], c.block_len);
    doc.block_mask[i] = 1;
  }
  return doc;
}

}  // namespace

TEST_CASE("position encoding at position zero is the sin/cos base point") {
  Mat enc = sinusoid_encoding(3, 6);
  for (int j = 0; j < 6; ++j) CHECK(enc(0, j) == (j % 2 == 0 ? 0.0 : 1.0));
  CHECK(enc(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(enc(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
}

TEST_CASE("embed_tokens is the sum of table rows and position encoding") {
  ModelConfig config = toy_config();
  SentenceBlock block = block_of({5, 6, 5}, config.block_len);

  {
    ParameterStore store;
    init_parameters(store, config, 1);
    store.at("token_embedding").value.setZero();
    Tape tape;
    TapeBinding binding(tape, store);
    BoundModel model = bind_model(binding, config);
    Mat out = embed_tokens(tape, model, block).value();
    Mat expected = sinusoid_encoding(config.block_len, config.hidden_size);
    CHECK((out - expected).cwiseAbs().maxCoeff() == 0.0);
  }

  ParameterStore store;
  init_parameters(store, config, 2);
  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  SentenceBlock other = block;
  other.token_ids[1] = 7;
  Mat a = embed_tokens(tape, model, block).value();
  Mat b = embed_tokens(tape, model, other).value();
  const Mat& table = store.at("token_embedding").value;
  const double embed_scale = std::sqrt(static_cast<double>(config.hidden_size));
  CHECK(((a - b).row(1) - embed_scale * (table.row(5) - table.row(7)))
            .cwiseAbs()
            .maxCoeff() < 1e-14);

  SentenceBlock bad = block;
  bad.token_ids[2] = config.vocab_size;
  CHECK_THROWS(embed_tokens(tape, model, bad));
}

TEST_CASE("block representation ignores PAD slot content entirely") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 3);

  SentenceBlock cls_only = block_of({}, config.block_len);
  SentenceBlock with_garbage = cls_only;
  for (size_t i = 1; i < with_garbage.token_ids.size(); ++i)
    with_garbage.token_ids[i] = 9;  // different ids in PAD slots, same mask

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Mat a = encode_sentence_block(tape, model, cls_only).block_rep.value();
  Mat b = encode_sentence_block(tape, model, with_garbage).block_rep.value();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("block and document representations are unit norm") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 4);
  SegmentedDocument doc = doc_of({{5, 6, 7}, {8, 9}}, config);

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  BlockEncoding enc = encode_sentence_block(tape, model, doc.blocks[0]);
  CHECK(enc.block_rep.value().row(0).norm() == doctest::Approx(1.0).epsilon(1e-5));

  Tensor out = smith_forward(tape, model, doc);
  CHECK(out.value().row(0).norm() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("sentence block encoding matches the straight-line reference") {
  ModelConfig config = toy_config();
  config.hidden_size = 4;
  config.num_heads = 2;
  config.block_len = 4;
  ParameterStore store;
  init_parameters(store, config, 5);
  SentenceBlock block = block_of({10, 11}, config.block_len);

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  BlockEncoding enc = encode_sentence_block(tape, model, block);

  auto ref = smith::test::ref_encode_block(store, config, block);
  CHECK((enc.token_reps.value() - ref.token_reps).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((enc.block_rep.value() - ref.block_rep).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("document encoding ignores masked tail blocks") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 6);
  std::mt19937_64 rng(6);

  Mat reps = random_mat(4, config.hidden_size, rng);
  std::vector<std::uint8_t> mask = {1, 1, 0, 0};

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Mat doc_rep = encode_document(tape, model, tape.leaf(reps, false), mask).doc_rep.value();

  Mat permuted = reps;
  permuted.row(2).swap(permuted.row(3));
  permuted.row(3).array() += 17.0;
  Mat doc_rep2 =
      encode_document(tape, model, tape.leaf(permuted, false), mask).doc_rep.value();
  CHECK((doc_rep - doc_rep2).cwiseAbs().maxCoeff() < 1e-9);

  // Single-block documents work (the single-key attention case).
  Mat one = reps.topRows(1);
  Mat doc_rep3 = encode_document(tape, model, tape.leaf(one, false), {1}).doc_rep.value();
  CHECK(doc_rep3.row(0).norm() == doctest::Approx(1.0).epsilon(1e-5));

  CHECK_THROWS(encode_document(tape, model, tape.leaf(reps, false), {0, 0, 0, 0}));
  CHECK_THROWS(encode_document(tape, model, tape.leaf(reps, false), {1, 0, 1, 0}));
}

TEST_CASE("combine modes") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 7);
  std::mt19937_64 rng(7);
  const int hidden = config.hidden_size;

  Mat reps = random_mat(3, hidden, rng);
  Mat doc_rep = random_mat(1, hidden, rng);

  auto combined = [&](CombineMode mode, const Mat& blocks) {
    ModelConfig c = config;
    c.combine_mode = mode;
    Tape tape;
    TapeBinding binding(tape, store);
    BoundModel model = bind_model(binding, c);
    return Mat(combine_representations(tape, model, tape.leaf(blocks, false),
                                       tape.leaf(doc_rep, false))
                   .value());
  };

  SUBCASE("normal returns the document representation at width H") {
    Mat out = combined(CombineMode::kNormal, reps);
    CHECK(out.cols() == hidden);
    CHECK((out - doc_rep).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("concat modes produce width 2H and agree on one block") {
    Mat one = reps.topRows(1);
    Mat sum = combined(CombineMode::kSumConcat, one);
    Mat mean = combined(CombineMode::kMeanConcat, one);
    CHECK(sum.cols() == 2 * hidden);
    CHECK((sum - mean).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("attention with zero score vector equals mean-concat") {
    store.at("combine.score_v").value.setZero();
    Mat attn = combined(CombineMode::kAttention, reps);
    Mat mean = combined(CombineMode::kMeanConcat, reps);
    CHECK((attn - mean).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("attention weights follow the block score softmax") {
    // Route the first embedding column straight into the logits so the
    // weights are softmax(ln 3, 0) = (0.75, 0.25).
    Mat blocks = Mat::Zero(2, hidden);
    blocks(0, 0) = std::log(3.0);
    blocks(1, 0) = 0.0;
    store.at("combine.proj_w").value.setZero();
    store.at("combine.score_v").value.setZero();
    store.at("combine.proj_w").value(0, 0) = 1.0;
    store.at("combine.score_v").value(0, 0) = 1.0;
    Mat out = combined(CombineMode::kAttention, blocks);
    Mat expected(1, 2 * hidden);
    expected.setZero();
    expected(0, 0) = 0.75 * std::log(3.0);
    expected.block(0, hidden, 1, hidden) = doc_rep;
    expected /= expected.norm();
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("smith_forward end to end in all combine modes") {
  for (CombineMode mode : {CombineMode::kNormal, CombineMode::kSumConcat,
                           CombineMode::kMeanConcat, CombineMode::kAttention}) {
    ModelConfig config = toy_config(mode);
    ParameterStore store;
    init_parameters(store, config, 8);
    SegmentedDocument doc = doc_of({{5, 6, 7, 8}, {9, 10}}, config);

    Tape tape;
    TapeBinding binding(tape, store);
    BoundModel model = bind_model(binding, config);
    Mat out = smith_forward(tape, model, doc).value();
    Mat again = smith_forward(tape, model, doc).value();

    CHECK(out.cols() == config.embedding_dim());
    CHECK(out.row(0).norm() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK((out - again).cwiseAbs().maxCoeff() == 0.0);  // identical documents

    Mat ref = smith::test::ref_smith_forward(store, config, doc);
    CHECK((out - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("sentence-level attention is strictly within blocks") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 9);

  SegmentedDocument doc = doc_of({{5, 6}, {7, 8}}, config);
  SegmentedDocument changed = doc;
  changed.blocks[1].token_ids[1] = 20;  // edit block 2 only

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Mat rep_before = encode_sentence_block(tape, model, doc.blocks[0]).block_rep.value();
  Mat rep_after = encode_sentence_block(tape, model, changed.blocks[0]).block_rep.value();
  CHECK((rep_before - rep_after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("appending all-PAD blocks never changes the embedding") {
  ModelConfig config = toy_config();
  ParameterStore store;
  init_parameters(store, config, 10);

  SegmentedDocument padded = doc_of({{5, 6, 7}, {8, 9}}, config);  // 2 real + 2 PAD blocks

  ModelConfig short_config = config;
  short_config.max_blocks = 2;
  SegmentedDocument trimmed = padded;
  trimmed.blocks.resize(2);
  trimmed.block_mask.resize(2);

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Mat full = smith_forward(tape, model, padded).value();

  Tape tape2;
  TapeBinding binding2(tape2, store);
  BoundModel model2 = bind_model(binding2, short_config);
  Mat tight = smith_forward(tape2, model2, trimmed).value();

  CHECK((full - tight).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("every encoder parameter receives gradient from a matching example") {
  ModelConfig config = toy_config(CombineMode::kAttention);
  ParameterStore store;
  init_parameters(store, config, 11);

  SegmentedDocument a = doc_of({{5, 6, 7}, {8, 9}}, config);
  SegmentedDocument b = doc_of({{10, 11}, {12, 13, 14}}, config);

  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Tensor ea = smith_forward(tape, model, a);
  Tensor eb = smith_forward(tape, model, b);
  Tensor cos = cosine_similarity(tape, ea, eb);
  Tensor loss = matching_loss(tape, cos, model.match_scale, model.match_bias, 1.0);
  tape.backward(loss);
  binding.harvest();

  for (const auto& p : store.all()) {
    // Pretraining-only parameters are not on this graph.
    if (p->name == "masked_block_symbol" || p->name == "word_pred_bias" ||
        p->name == "word_pred_scale")
      continue;
    INFO("parameter ", p->name);
    CHECK(p->grad.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("toy model gradients match finite differences through the full forward") {
  ModelConfig config = toy_config(CombineMode::kAttention);
  config.hidden_size = 4;
  config.num_heads = 2;
  config.block_len = 4;
  config.max_blocks = 2;
  config.vocab_size = 12;
  ParameterStore store;
  init_parameters(store, config, 12);

  SegmentedDocument a = doc_of({{5, 6, 7}, {8, 9}}, config);
  SegmentedDocument b = doc_of({{10, 11}, {7, 5}}, config);

  auto forward_loss = [&](Tape& tape) {
    TapeBinding binding(tape, store);
    BoundModel model = bind_model(binding, config);
    Tensor ea = smith_forward(tape, model, a);
    Tensor eb = smith_forward(tape, model, b);
    Tensor cos = cosine_similarity(tape, ea, eb);
    Tensor loss = matching_loss(tape, cos, model.match_scale, model.match_bias, 1.0);
    return std::pair(loss, std::move(binding));
  };
  auto value = [&]() {
    Tape tape;
    return forward_loss(tape).first.value()(0, 0);
  };
  auto collect = [&]() {
    Tape tape;
    auto [loss, binding] = forward_loss(tape);
    tape.backward(loss);
    binding.harvest();
  };
  CHECK(smith::test::max_store_grad_err(store, value, collect) < 1e-4);
}
