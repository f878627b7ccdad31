#include "smith/matcher.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "smith/vocab.hpp"

namespace smith {

namespace {

void require_unmasked(const SegmentedDocument& doc) {
  for (size_t b = 0; b < doc.blocks.size(); ++b) {
    if (!doc.block_mask[b]) break;
    const SentenceBlock& block = doc.blocks[b];
    for (int i = 0; i < block.real_count; ++i)
      if (block.token_ids[static_cast<size_t>(i)] == Vocabulary::kMask)
        throw std::invalid_argument(
            "fine-tuning input contains mask tokens; masks must be removed after pretraining");
  }
}

}  // namespace

double pair_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("embedding dimensions disagree: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Tensor cosine_similarity(Tape& tape, Tensor a, Tensor b) {
  (void)tape;
  if (a.cols() != b.cols() || a.rows() != 1 || b.rows() != 1)
    throw std::invalid_argument("cosine_similarity expects two 1 x d embeddings");
  // Encoder outputs are L2-normalized, so the dot product is the cosine.
  return sum_all(mul(a, b));
}

Tensor matching_probability(Tape& tape, Tensor cos, Tensor scale, Tensor bias) {
  (void)tape;
  return sigmoid(add(mul(scale, cos), bias));
}

Tensor matching_loss(Tape& tape, Tensor cos, Tensor scale, Tensor bias, double label) {
  if (label != 0.0 && label != 1.0) throw std::invalid_argument("label must be 0 or 1");
  Tensor p = matching_probability(tape, cos, scale, bias);
  return binary_cross_entropy(p, {label});
}

EvalMetrics evaluate(const std::vector<double>& probabilities, const std::vector<int>& labels,
                     double threshold) {
  if (probabilities.empty()) throw std::invalid_argument("evaluate: empty input");
  if (probabilities.size() != labels.size())
    throw std::invalid_argument("evaluate: scores and labels differ in length");
  long tp = 0, tn = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < probabilities.size(); ++i) {
    const bool pred = probabilities[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++tp;
    else if (pred && !pos) ++fp;
    else if (!pred && pos) ++fn;
    else ++tn;
  }
  EvalMetrics m;
  m.threshold = threshold;
  const double n = static_cast<double>(probabilities.size());
  m.accuracy = static_cast<double>(tp + tn) / n;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  return m;
}

FinetuneResult finetune_step(ParameterStore& store, AdamState& adam,
                             const AdamConfig& adam_config, const ModelConfig& config,
                             const std::vector<MatchExample>& batch, std::mt19937_64& rng,
                             bool train_dropout) {
  if (batch.empty()) throw std::invalid_argument("fine-tune batch is empty");
  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  const Dropout drop =
      train_dropout && config.dropout > 0.0 ? Dropout{config.dropout, &rng} : Dropout{};

  std::vector<Tensor> probs;
  std::vector<double> labels;
  for (const auto& example : batch) {
    require_unmasked(example.source);
    require_unmasked(example.target);
    Tensor source = smith_forward(tape, model, example.source, drop);
    Tensor target = smith_forward(tape, model, example.target, drop);
    Tensor cos = cosine_similarity(tape, source, target);
    probs.push_back(matching_probability(tape, cos, model.match_scale, model.match_bias));
    labels.push_back(static_cast<double>(example.label));
  }
  Tensor stacked = concat_rows(probs);
  Tensor loss = binary_cross_entropy(stacked, labels);
  tape.backward(loss);
  binding.harvest();
  adam_step(store, adam, adam_config);

  FinetuneResult result;
  result.loss = loss.value()(0, 0);
  int correct = 0;
  for (size_t i = 0; i < batch.size(); ++i)
    correct += (stacked.value()(static_cast<Eigen::Index>(i), 0) >= 0.5) == (batch[i].label == 1);
  result.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
  return result;
}

double match_probability(ParameterStore& store, const ModelConfig& config,
                         const MatchExample& example) {
  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Tensor source = smith_forward(tape, model, example.source);
  Tensor target = smith_forward(tape, model, example.target);
  Tensor cos = cosine_similarity(tape, source, target);
  return matching_probability(tape, cos, model.match_scale, model.match_bias).value()(0, 0);
}

std::vector<DocumentEmbedding> infer_embeddings(ParameterStore& store, const ModelConfig& config,
                                                const std::vector<SegmentedDocument>& docs) {
  std::vector<DocumentEmbedding> embeddings;
  embeddings.reserve(docs.size());
  for (const auto& doc : docs) {
    if (doc.real_block_count() == 0) {
      std::cerr << "warning: skipping document " << doc.doc_id << " with no non-empty blocks\n";
      continue;
    }
    embeddings.push_back(embed_document(store, config, doc));
  }
  return embeddings;
}

}  // namespace smith
