#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "smith/config.hpp"
#include "smith/ops.hpp"
#include "smith/params.hpp"
#include "smith/segmenter.hpp"
#include "smith/tape.hpp"

namespace smith {

// Creates every learnable array for the model in deterministic order:
// token embedding, sentence-level layer stack, sentence pooler, document
// layer stack, document pooler, combine-attention projection, the masked
// block symbol, the tied word-prediction bias, and the match calibration
// scalars. Weights are normal(0, 0.02) draws from the given seed; biases
// zero; norm gains one.
void init_parameters(ParameterStore& store, const ModelConfig& config, std::uint64_t seed);

// Sinusoidal position encoding table: row p holds sin/cos features of
// position p (even columns sine, odd columns cosine).
Mat sinusoid_encoding(int positions, int dim);

// Per-tape view of the model parameters.
struct BoundModel {
  const ModelConfig* config = nullptr;
  Tensor token_embedding;
  std::vector<TransformerLayerParams> sent_layers;
  Tensor sent_pool_w, sent_pool_b;
  std::vector<TransformerLayerParams> doc_layers;
  Tensor doc_pool_w, doc_pool_b;
  Tensor combine_w, combine_v;
  Tensor masked_block_symbol;  // learned stand-in for a masked block
  Tensor word_pred_scale;  // learnable logit gain for the tied head
  Tensor word_pred_bias;
  Tensor match_scale, match_bias;
};

BoundModel bind_model(TapeBinding& binding, const ModelConfig& config);

// Token embedding + sinusoidal position rows for one block.
Tensor embed_tokens(Tape& tape, const BoundModel& model, const SentenceBlock& block,
                    const Dropout& drop = {});

struct BlockEncoding {
  Tensor token_reps;  // block_len x H
  Tensor block_rep;   // 1 x H, unit norm; block position added at doc level
};
BlockEncoding encode_sentence_block(Tape& tape, const BoundModel& model,
                                    const SentenceBlock& block, const Dropout& drop = {});

struct DocEncoding {
  Tensor context;  // rows x H contextual block representations
  Tensor doc_rep;  // 1 x H, unit norm
};
// block_reps rows are sentence-level block representations (positions are
// added here). block_mask marks usable rows; it must have at least one 1 and
// be a prefix of ones.
DocEncoding encode_document(Tape& tape, const BoundModel& model, Tensor block_reps,
                            const std::vector<std::uint8_t>& block_mask,
                            const Dropout& drop = {});

// Fuses sentence-level and document-level representations per the configured
// mode; the result is L2-normalized. block_reps must contain only real
// (unmasked) blocks.
Tensor combine_representations(Tape& tape, const BoundModel& model, Tensor block_reps,
                               Tensor doc_rep);

// Full document encoder: per-block sentence encoding, document-level
// attention over the non-empty blocks, then representation combination.
Tensor smith_forward(Tape& tape, const BoundModel& model, const SegmentedDocument& doc,
                     const Dropout& drop = {});

struct DocumentEmbedding {
  std::string doc_id;
  Eigen::VectorXd vector;
};

// Convenience: evaluation-mode embedding straight from a parameter store.
DocumentEmbedding embed_document(ParameterStore& store, const ModelConfig& config,
                                 const SegmentedDocument& doc);

}  // namespace smith
