#include "smith/encoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace smith {

namespace {

void init_normal(Mat& m, std::mt19937_64& rng, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
}

// Glorot scale keeps sub-layer outputs commensurate with their residual
// path at any hidden size.
void init_glorot(Mat& m, std::mt19937_64& rng) {
  init_normal(m, rng, std::sqrt(2.0 / static_cast<double>(m.rows() + m.cols())));
}

void create_layer_stack(ParameterStore& store, const std::string& prefix, int layers,
                        int hidden, std::mt19937_64& rng) {
  const int ff = 4 * hidden;
  for (int i = 0; i < layers; ++i) {
    const std::string base = prefix + ".layer" + std::to_string(i) + ".";
    for (const char* name : {"attn.query_w", "attn.key_w", "attn.value_w", "attn.out_w"})
      init_glorot(store.create(base + name, hidden, hidden).value, rng);
    for (const char* name : {"attn.query_b", "attn.key_b", "attn.value_b", "attn.out_b"})
      store.create(base + name, 1, hidden);
    store.create(base + "norm1.gain", 1, hidden).value.setOnes();
    store.create(base + "norm1.bias", 1, hidden);
    init_glorot(store.create(base + "ff.in_w", hidden, ff).value, rng);
    store.create(base + "ff.in_b", 1, ff);
    init_glorot(store.create(base + "ff.out_w", ff, hidden).value, rng);
    store.create(base + "ff.out_b", 1, hidden);
    store.create(base + "norm2.gain", 1, hidden).value.setOnes();
    store.create(base + "norm2.bias", 1, hidden);
  }
}

TransformerLayerParams bind_layer(TapeBinding& binding, const std::string& prefix, int i) {
  const std::string base = prefix + ".layer" + std::to_string(i) + ".";
  TransformerLayerParams p;
  p.attn_query_w = binding.get(base + "attn.query_w");
  p.attn_query_b = binding.get(base + "attn.query_b");
  p.attn_key_w = binding.get(base + "attn.key_w");
  p.attn_key_b = binding.get(base + "attn.key_b");
  p.attn_value_w = binding.get(base + "attn.value_w");
  p.attn_value_b = binding.get(base + "attn.value_b");
  p.attn_out_w = binding.get(base + "attn.out_w");
  p.attn_out_b = binding.get(base + "attn.out_b");
  p.norm1_gain = binding.get(base + "norm1.gain");
  p.norm1_bias = binding.get(base + "norm1.bias");
  p.ff_in_w = binding.get(base + "ff.in_w");
  p.ff_in_b = binding.get(base + "ff.in_b");
  p.ff_out_w = binding.get(base + "ff.out_w");
  p.ff_out_b = binding.get(base + "ff.out_b");
  p.norm2_gain = binding.get(base + "norm2.gain");
  p.norm2_bias = binding.get(base + "norm2.bias");
  return p;
}

std::vector<std::uint8_t> prefix_mask(const std::vector<std::uint8_t>& mask) {
  bool seen_zero = false;
  for (auto m : mask) {
    if (m == 0) seen_zero = true;
    else if (seen_zero)
      throw std::invalid_argument("block mask must be a prefix of ones");
  }
  return mask;
}

}  // namespace

void init_parameters(ParameterStore& store, const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const int hidden = config.hidden_size;
  // Embedding rows are scaled by sqrt(H) at lookup, so a 1/sqrt(H) draw puts
  // token content on the sinusoid scale.
  init_normal(store.create("token_embedding", config.vocab_size, hidden).value, rng,
              1.0 / std::sqrt(static_cast<double>(hidden)));
  create_layer_stack(store, "sent", config.sent_layers, hidden, rng);
  init_glorot(store.create("sent.pool_w", hidden, hidden).value, rng);
  store.create("sent.pool_b", 1, hidden);
  create_layer_stack(store, "doc", config.doc_layers, hidden, rng);
  init_glorot(store.create("doc.pool_w", hidden, hidden).value, rng);
  store.create("doc.pool_b", 1, hidden);
  init_glorot(store.create("combine.proj_w", hidden, config.effective_combine_dim()).value, rng);
  init_glorot(store.create("combine.score_v", config.effective_combine_dim(), 1).value, rng);
  init_normal(store.create("masked_block_symbol", 1, hidden).value, rng, 0.02);
  // Tied-head logit gain starts at 1/sqrt(H) so untrained predictions are
  // near uniform; training is free to sharpen it.
  store.create("word_pred_scale", 1, 1).value(0, 0) =
      1.0 / std::sqrt(static_cast<double>(hidden));
  store.create("word_pred_bias", 1, config.vocab_size);
  store.create("match.scale", 1, 1).value(0, 0) = 5.0;
  store.create("match.bias", 1, 1);
}

Mat sinusoid_encoding(int positions, int dim) {
  Mat enc(positions, dim);
  for (int p = 0; p < positions; ++p) {
    for (int j = 0; j < dim; ++j) {
      const int pair = j / 2;
      const double rate = std::pow(10000.0, -2.0 * pair / static_cast<double>(dim));
      const double angle = p * rate;
      enc(p, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return enc;
}

BoundModel bind_model(TapeBinding& binding, const ModelConfig& config) {
  BoundModel m;
  m.config = &config;
  m.token_embedding = binding.get("token_embedding");
  for (int i = 0; i < config.sent_layers; ++i) m.sent_layers.push_back(bind_layer(binding, "sent", i));
  m.sent_pool_w = binding.get("sent.pool_w");
  m.sent_pool_b = binding.get("sent.pool_b");
  for (int i = 0; i < config.doc_layers; ++i) m.doc_layers.push_back(bind_layer(binding, "doc", i));
  m.doc_pool_w = binding.get("doc.pool_w");
  m.doc_pool_b = binding.get("doc.pool_b");
  m.combine_w = binding.get("combine.proj_w");
  m.combine_v = binding.get("combine.score_v");
  m.masked_block_symbol = binding.get("masked_block_symbol");
  m.word_pred_scale = binding.get("word_pred_scale");
  m.word_pred_bias = binding.get("word_pred_bias");
  m.match_scale = binding.get("match.scale");
  m.match_bias = binding.get("match.bias");
  return m;
}

Tensor embed_tokens(Tape& tape, const BoundModel& model, const SentenceBlock& block,
                    const Dropout& drop) {
  const int vocab = model.config->vocab_size;
  for (int id : block.token_ids)
    if (id < 0 || id >= vocab)
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(vocab));
  std::vector<int> ids(block.token_ids.begin(), block.token_ids.end());
  // sqrt(H) embedding scale balances content against the fixed sinusoids.
  Tensor tok = scale(gather_rows(model.token_embedding, std::move(ids)),
                     std::sqrt(static_cast<double>(model.config->hidden_size)));
  Tensor pos = tape.constant(
      sinusoid_encoding(static_cast<int>(block.token_ids.size()), model.config->hidden_size));
  return dropout(add(tok, pos), drop);
}

BlockEncoding encode_sentence_block(Tape& tape, const BoundModel& model,
                                    const SentenceBlock& block, const Dropout& drop) {
  if (block.empty()) throw std::invalid_argument("cannot encode an empty sentence block");
  Tensor x = embed_tokens(tape, model, block, drop);
  for (const auto& layer : model.sent_layers)
    x = transformer_layer(x, layer, model.config->num_heads, block.token_mask, drop);
  Tensor pooled = affine(gather_rows(x, {0}), model.sent_pool_w, model.sent_pool_b);
  return {x, l2_normalize_rows(pooled)};
}

DocEncoding encode_document(Tape& tape, const BoundModel& model, Tensor block_reps,
                            const std::vector<std::uint8_t>& block_mask,
                            const Dropout& drop) {
  if (static_cast<Eigen::Index>(block_mask.size()) != block_reps.rows())
    throw std::invalid_argument("block mask length must match block count");
  int real = 0;
  for (auto m : prefix_mask(block_mask)) real += m;
  if (real == 0) throw std::invalid_argument("document has no non-empty blocks");

  // Block representations are unit norm; the same sqrt(H) scale keeps them
  // commensurate with the block position sinusoids.
  Tensor pos = tape.constant(
      sinusoid_encoding(static_cast<int>(block_reps.rows()), model.config->hidden_size));
  Tensor scaled =
      scale(block_reps, std::sqrt(static_cast<double>(model.config->hidden_size)));
  Tensor x = dropout(add(scaled, pos), drop);
  for (const auto& layer : model.doc_layers)
    x = transformer_layer(x, layer, model.config->num_heads, block_mask, drop);
  Tensor pooled = affine(gather_rows(x, {0}), model.doc_pool_w, model.doc_pool_b);
  return {x, l2_normalize_rows(pooled)};
}

Tensor combine_representations(Tape& tape, const BoundModel& model, Tensor block_reps,
                               Tensor doc_rep) {
  (void)tape;
  switch (model.config->combine_mode) {
    case CombineMode::kNormal:
      return doc_rep;
    case CombineMode::kSumConcat:
      return l2_normalize_rows(concat_cols({sum_rows(block_reps), doc_rep}));
    case CombineMode::kMeanConcat:
      return l2_normalize_rows(concat_cols({mean_rows(block_reps), doc_rep}));
    case CombineMode::kAttention: {
      Tensor logits = transpose(matmul(matmul(block_reps, model.combine_w), model.combine_v));
      Tensor weights = softmax_rows(logits);  // 1 x blocks
      Tensor weighted = matmul(weights, block_reps);
      return l2_normalize_rows(concat_cols({weighted, doc_rep}));
    }
  }
  throw std::invalid_argument("invalid combine mode value");
}

Tensor smith_forward(Tape& tape, const BoundModel& model, const SegmentedDocument& doc,
                     const Dropout& drop) {
  const ModelConfig& config = *model.config;
  if (static_cast<int>(doc.blocks.size()) > config.max_blocks)
    throw std::invalid_argument("document has more blocks than the model allows");
  std::vector<Tensor> reps;
  for (size_t i = 0; i < doc.blocks.size(); ++i) {
    if (!doc.block_mask[i]) continue;
    if (static_cast<int>(doc.blocks[i].token_ids.size()) != config.block_len)
      throw std::invalid_argument("block length does not match the model configuration");
    reps.push_back(encode_sentence_block(tape, model, doc.blocks[i], drop).block_rep);
  }
  if (reps.empty()) throw std::invalid_argument("document has no non-empty blocks");
  Tensor stacked = concat_rows(reps);
  std::vector<std::uint8_t> mask(reps.size(), 1);
  DocEncoding enc = encode_document(tape, model, stacked, mask, drop);
  return combine_representations(tape, model, stacked, enc.doc_rep);
}

DocumentEmbedding embed_document(ParameterStore& store, const ModelConfig& config,
                                 const SegmentedDocument& doc) {
  Tape tape;
  TapeBinding binding(tape, store);
  BoundModel model = bind_model(binding, config);
  Tensor out = smith_forward(tape, model, doc);
  DocumentEmbedding emb;
  emb.doc_id = doc.doc_id;
  emb.vector = out.value().row(0).transpose();
  return emb;
}

}  // namespace smith
