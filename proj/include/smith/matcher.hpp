#pragma once

#include <random>
#include <vector>

#include "smith/adam.hpp"
#include "smith/encoder.hpp"
#include "smith/segmenter.hpp"

namespace smith {

struct MatchExample {
  SegmentedDocument source;
  SegmentedDocument target;
  int label = 0;
};

// Standard cosine; equals the dot product for unit-norm inputs.
double pair_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Graph-side cosine of two 1 x d embeddings.
Tensor cosine_similarity(Tape& tape, Tensor a, Tensor b);

// Calibrated matching probability sigmoid(scale * cos + bias).
Tensor matching_probability(Tape& tape, Tensor cos, Tensor scale, Tensor bias);

// Binary cross-entropy of the calibrated probability against the label.
Tensor matching_loss(Tape& tape, Tensor cos, Tensor scale, Tensor bias, double label);

struct EvalMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.5;
};

// Confusion-matrix metrics; predict positive when probability >= threshold.
// Precision and recall fall back to 0 when undefined.
EvalMetrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels,
                     double threshold = 0.5);

struct FinetuneResult {
  double loss = 0.0;
  double accuracy = 0.0;  // batch accuracy at the 0.5 probability threshold
};

// One Siamese fine-tuning step; both towers share the parameter store.
FinetuneResult finetune_step(ParameterStore& store, AdamState& adam,
                             const AdamConfig& adam_config, const ModelConfig& config,
                             const std::vector<MatchExample>& batch, std::mt19937_64& rng,
                             bool train_dropout = true);

// Calibrated matching probability for one pair, evaluation mode.
double match_probability(ParameterStore& store, const ModelConfig& config,
                         const MatchExample& example);

// Evaluation-mode embeddings; documents with no non-empty blocks are skipped
// with a warning on stderr.
std::vector<DocumentEmbedding> infer_embeddings(ParameterStore& store, const ModelConfig& config,
                                                const std::vector<SegmentedDocument>& docs);

}  // namespace smith
