#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "smith/adam.hpp"
#include "smith/encoder.hpp"
#include "smith/segmenter.hpp"

namespace smith {

struct WordMaskTarget {
  int doc = 0;
  int block = 0;
  int offset = 0;
  int original_id = 0;
};

struct WordMaskResult {
  std::vector<SegmentedDocument> docs;
  std::vector<WordMaskTarget> targets;
};

// BERT-style corruption: each eligible token (real, non-CLS, outside
// skip_blocks) is independently selected with probability rate; selected
// tokens become MASK 80% of the time, a random vocabulary word 10%, and stay
// unchanged 10%. Original ids are recorded for the prediction loss.
WordMaskResult mask_words(const std::vector<SegmentedDocument>& docs, double rate,
                          int vocab_size, std::mt19937_64& rng,
                          const std::vector<std::vector<int>>& skip_blocks = {});

// Uniform without-replacement draw of target_count block indices per
// document, re-sampled every call. Documents with fewer non-empty blocks
// than target_count have every block selected.
std::vector<std::vector<int>> sample_masked_blocks(const std::vector<int>& real_block_counts,
                                                   int target_count, std::mt19937_64& rng);

// In-batch contrastive loss: rows of predicted are scored against every
// target row via dot product; the matching row is the positive class.
// targets are constants (no gradient flows into them).
Tensor masked_block_loss(Tape& tape, Tensor predicted, const Mat& targets);

enum class PretrainObjective { kWordOnly, kWordAndBlock };

struct PretrainStepConfig {
  PretrainObjective objective = PretrainObjective::kWordAndBlock;
  double word_mask_rate = 0.15;
  int masked_blocks_per_doc = 2;
  bool train_dropout = true;
};

struct PretrainLoss {
  double word_loss = 0.0;
  double block_loss = 0.0;
  double total = 0.0;
  double block_top1_accuracy = 0.0;  // over the in-batch candidates
  int masked_words = 0;
  int masked_blocks = 0;
};

// One optimizer step of the joint masked-word / masked-block objective.
PretrainLoss pretrain_step(ParameterStore& store, AdamState& adam, const AdamConfig& adam_config,
                           const ModelConfig& config, const PretrainStepConfig& step_config,
                           const std::vector<SegmentedDocument>& batch, std::mt19937_64& rng);

// Forward + losses without the optimizer update; used for loss inspection.
PretrainLoss pretrain_eval(ParameterStore& store, const ModelConfig& config,
                           const PretrainStepConfig& step_config,
                           const std::vector<SegmentedDocument>& batch, std::mt19937_64& rng);

}  // namespace smith
