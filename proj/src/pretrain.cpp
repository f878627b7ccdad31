#include "smith/pretrain.hpp"

#include <algorithm>
#include <stdexcept>

#include "smith/vocab.hpp"

namespace smith {

namespace {

struct ForwardResult {
  Tensor word_loss;
  Tensor block_loss;
  double top1 = 0.0;
  int masked_words = 0;
  int masked_blocks = 0;
};

// Shared by pretrain_step and pretrain_eval: builds the graph and both loss
// terms on the caller's tape.
ForwardResult pretrain_forward(Tape& tape, TapeBinding& binding, const ModelConfig& config,
                               const PretrainStepConfig& step_config,
                               const std::vector<SegmentedDocument>& batch,
                               std::mt19937_64& rng) {
  if (batch.empty()) throw std::invalid_argument("pretrain batch is empty");
  BoundModel model = bind_model(binding, config);
  const Dropout drop = step_config.train_dropout && config.dropout > 0.0
                           ? Dropout{config.dropout, &rng}
                           : Dropout{};

  // Block positions are drawn first so word masking can avoid those blocks.
  std::vector<std::vector<int>> masked_blocks;
  if (step_config.objective == PretrainObjective::kWordAndBlock &&
      step_config.masked_blocks_per_doc > 0) {
    std::vector<int> counts;
    counts.reserve(batch.size());
    for (const auto& doc : batch) counts.push_back(doc.real_block_count());
    masked_blocks = sample_masked_blocks(counts, step_config.masked_blocks_per_doc, rng);
  }
  WordMaskResult masked =
      mask_words(batch, step_config.word_mask_rate, config.vocab_size, rng, masked_blocks);

  // Sentence level over the word-masked blocks.
  std::vector<std::vector<BlockEncoding>> encodings(batch.size());
  for (size_t d = 0; d < masked.docs.size(); ++d) {
    const SegmentedDocument& doc = masked.docs[d];
    for (size_t b = 0; b < doc.blocks.size(); ++b) {
      if (!doc.block_mask[b]) break;
      encodings[d].push_back(encode_sentence_block(tape, model, doc.blocks[b], drop));
    }
  }

  ForwardResult result;

  // Masked word prediction from the sentence-level token outputs, through
  // the tied embedding table.
  result.masked_words = static_cast<int>(masked.targets.size());
  if (masked.targets.empty()) {
    result.word_loss = tape.constant(Mat::Zero(1, 1));
  } else {
    std::vector<Tensor> rows;
    std::vector<int> target_ids;
    rows.reserve(masked.targets.size());
    for (const auto& t : masked.targets) {
      rows.push_back(gather_rows(encodings[static_cast<size_t>(t.doc)]
                                     [static_cast<size_t>(t.block)].token_reps,
                                 {t.offset}));
      target_ids.push_back(t.original_id);
    }
    // Tied-embedding scores through the learnable logit gain; its 1/sqrt(H)
    // start keeps an untrained model near the uniform distribution.
    Tensor logits = add_row_vector(
        scale_by(matmul_nt(concat_rows(rows), model.token_embedding),
                 model.word_pred_scale),
        model.word_pred_bias);
    result.word_loss = softmax_cross_entropy(logits, std::move(target_ids));
  }

  // Document level; masked block positions are swapped for the learned
  // symbol before the stack runs.
  std::vector<Tensor> predicted_rows;
  std::vector<Mat> target_rows;
  static const std::vector<int> kNoPositions;
  for (size_t d = 0; d < batch.size(); ++d) {
    std::vector<Tensor> reps;
    reps.reserve(encodings[d].size());
    for (const auto& enc : encodings[d]) reps.push_back(enc.block_rep);
    Tensor stacked = concat_rows(reps);
    const std::vector<int>& positions = masked_blocks.empty() ? kNoPositions : masked_blocks[d];
    Tensor doc_input = positions.empty()
                           ? stacked
                           : replace_rows(stacked, positions, model.masked_block_symbol);
    std::vector<std::uint8_t> mask(reps.size(), 1);
    DocEncoding enc = encode_document(tape, model, doc_input, mask, drop);
    for (int k : positions) {
      predicted_rows.push_back(gather_rows(enc.context, {k}));
      target_rows.push_back(stacked.value().row(k));
    }
  }

  result.masked_blocks = static_cast<int>(predicted_rows.size());
  if (predicted_rows.empty()) {
    result.block_loss = tape.constant(Mat::Zero(1, 1));
  } else {
    Tensor predicted = concat_rows(predicted_rows);
    Mat targets(static_cast<Eigen::Index>(target_rows.size()), config.hidden_size);
    for (size_t i = 0; i < target_rows.size(); ++i)
      targets.row(static_cast<Eigen::Index>(i)) = target_rows[i];
    result.block_loss = masked_block_loss(tape, predicted, targets);

    Mat similarity = predicted.value() * targets.transpose();
    int hits = 0;
    for (Eigen::Index r = 0; r < similarity.rows(); ++r) {
      Eigen::Index best = 0;
      similarity.row(r).maxCoeff(&best);
      hits += best == r;
    }
    result.top1 = static_cast<double>(hits) / static_cast<double>(similarity.rows());
  }
  return result;
}

PretrainLoss to_loss(const ForwardResult& fwd, const PretrainStepConfig& step_config) {
  PretrainLoss loss;
  loss.word_loss = fwd.word_loss.value()(0, 0);
  loss.block_loss = fwd.block_loss.value()(0, 0);
  loss.total = step_config.objective == PretrainObjective::kWordOnly
                   ? loss.word_loss
                   : loss.word_loss + loss.block_loss;
  loss.block_top1_accuracy = fwd.top1;
  loss.masked_words = fwd.masked_words;
  loss.masked_blocks = fwd.masked_blocks;
  return loss;
}

}  // namespace

WordMaskResult mask_words(const std::vector<SegmentedDocument>& docs, double rate,
                          int vocab_size, std::mt19937_64& rng,
                          const std::vector<std::vector<int>>& skip_blocks) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("word mask rate must be in [0, 1)");
  if (vocab_size <= Vocabulary::kNumSpecial)
    throw std::invalid_argument("vocabulary has no regular words to sample");
  WordMaskResult result;
  result.docs = docs;
  if (rate == 0.0) return result;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_word(Vocabulary::kNumSpecial, vocab_size - 1);

  for (size_t d = 0; d < result.docs.size(); ++d) {
    SegmentedDocument& doc = result.docs[d];
    const std::vector<int>* skips = d < skip_blocks.size() ? &skip_blocks[d] : nullptr;
    for (size_t b = 0; b < doc.blocks.size(); ++b) {
      if (!doc.block_mask[b]) break;
      if (skips && std::find(skips->begin(), skips->end(), static_cast<int>(b)) != skips->end())
        continue;
      SentenceBlock& block = doc.blocks[b];
      for (int off = 1; off < block.real_count; ++off) {
        if (unit(rng) >= rate) continue;
        result.targets.push_back({static_cast<int>(d), static_cast<int>(b), off,
                                  block.token_ids[static_cast<size_t>(off)]});
        const double action = unit(rng);
        if (action < 0.8)
          block.token_ids[static_cast<size_t>(off)] = Vocabulary::kMask;
        else if (action < 0.9)
          block.token_ids[static_cast<size_t>(off)] = random_word(rng);
        // else leave the token unchanged
      }
    }
  }
  return result;
}

std::vector<std::vector<int>> sample_masked_blocks(const std::vector<int>& real_block_counts,
                                                   int target_count, std::mt19937_64& rng) {
  if (target_count < 0) throw std::invalid_argument("masked block count must be non-negative");
  std::vector<std::vector<int>> result(real_block_counts.size());
  for (size_t d = 0; d < real_block_counts.size(); ++d) {
    const int n = real_block_counts[d];
    const int m = std::min(target_count, n);
    if (m == 0) continue;
    // Partial Fisher-Yates over the block indices.
    std::vector<int> indices(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) indices[static_cast<size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(indices[static_cast<size_t>(i)], indices[static_cast<size_t>(pick(rng))]);
    }
    indices.resize(static_cast<size_t>(m));
    std::sort(indices.begin(), indices.end());
    result[d] = std::move(indices);
  }
  return result;
}

Tensor masked_block_loss(Tape& tape, Tensor predicted, const Mat& targets) {
  if (predicted.rows() != targets.rows() || predicted.cols() != targets.cols())
    throw std::invalid_argument("masked_block_loss: predicted/target shapes disagree");
  if (predicted.rows() == 0) return tape.constant(Mat::Zero(1, 1));
  Tensor similarity = matmul_nt(predicted, tape.constant(targets));
  std::vector<int> diagonal(static_cast<size_t>(predicted.rows()));
  for (size_t i = 0; i < diagonal.size(); ++i) diagonal[i] = static_cast<int>(i);
  return softmax_cross_entropy(similarity, std::move(diagonal));
}

PretrainLoss pretrain_step(ParameterStore& store, AdamState& adam, const AdamConfig& adam_config,
                           const ModelConfig& config, const PretrainStepConfig& step_config,
                           const std::vector<SegmentedDocument>& batch, std::mt19937_64& rng) {
  Tape tape;
  TapeBinding binding(tape, store);
  ForwardResult fwd = pretrain_forward(tape, binding, config, step_config, batch, rng);
  Tensor total = step_config.objective == PretrainObjective::kWordOnly
                     ? fwd.word_loss
                     : add(fwd.word_loss, fwd.block_loss);
  tape.backward(total);
  binding.harvest();
  adam_step(store, adam, adam_config);
  return to_loss(fwd, step_config);
}

PretrainLoss pretrain_eval(ParameterStore& store, const ModelConfig& config,
                           const PretrainStepConfig& step_config,
                           const std::vector<SegmentedDocument>& batch, std::mt19937_64& rng) {
  Tape tape;
  TapeBinding binding(tape, store);
  ForwardResult fwd = pretrain_forward(tape, binding, config, step_config, batch, rng);
  return to_loss(fwd, step_config);
}

}  // namespace smith
