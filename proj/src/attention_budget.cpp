#include "smith/attention_budget.hpp"

#include <stdexcept>

#include "smith/encoder.hpp"

namespace smith {

namespace {

// Smallest width divisible by the head count keeps the probe model cheap.
ModelConfig probe_config(int block_len, int max_blocks, int heads, int layers) {
  ModelConfig config;
  config.sent_layers = layers;
  config.doc_layers = layers;
  config.hidden_size = 2 * heads;
  config.num_heads = heads;
  config.block_len = block_len;
  config.max_blocks = max_blocks;
  config.vocab_size = 8;
  config.dropout = 0.0;
  config.combine_mode = CombineMode::kNormal;
  return config;
}

SentenceBlock full_block(int block_len) {
  SentenceBlock block;
  block.token_ids.assign(static_cast<size_t>(block_len), 5);
  block.token_ids[0] = 2;
  block.token_mask.assign(static_cast<size_t>(block_len), 1);
  block.real_count = block_len;
  return block;
}

}  // namespace

AttentionBudget count_attention_entries(int tokens, int block_len, int batch, int heads,
                                        int layers) {
  if (tokens < 1 || block_len < 1 || batch < 1 || heads < 1 || layers < 1)
    throw std::invalid_argument("attention budget arguments must be positive");
  AttentionBudget b;
  b.tokens = tokens;
  b.block_len = block_len;
  b.batch = batch;
  b.heads = heads;
  b.layers = layers;
  const int blocks = (tokens + block_len - 1) / block_len;
  b.padded_tokens = blocks * block_len;
  const std::uint64_t n = static_cast<std::uint64_t>(b.padded_tokens);
  const std::uint64_t ls = static_cast<std::uint64_t>(block_len);
  const std::uint64_t nb = static_cast<std::uint64_t>(blocks);
  const std::uint64_t scale =
      static_cast<std::uint64_t>(batch) * static_cast<std::uint64_t>(heads) *
      static_cast<std::uint64_t>(layers);
  b.flat_entries = scale * n * n;
  b.sentence_level_entries = scale * ls * ls * nb;
  b.document_level_entries = scale * nb * nb;
  b.hierarchical_total = b.sentence_level_entries + b.document_level_entries;
  b.flat_bytes = b.flat_entries * 4;
  b.hierarchical_bytes = b.hierarchical_total * 4;
  b.reduction_factor =
      static_cast<double>(b.flat_entries) / static_cast<double>(b.hierarchical_total);
  return b;
}

InstrumentedCounts instrument_attention(int tokens, int block_len, int batch, int heads,
                                        int layers) {
  const int blocks = (tokens + block_len - 1) / block_len;
  const int padded = blocks * block_len;
  InstrumentedCounts counts;

  // Flat reference: the sentence-level stack over one block covering every
  // token.
  {
    ModelConfig config = probe_config(padded, 1, heads, layers);
    ParameterStore store;
    init_parameters(store, config, 7);
    SentenceBlock block = full_block(padded);
    attention_entry_counter() = 0;
    for (int i = 0; i < batch; ++i) {
      Tape tape;
      TapeBinding binding(tape, store);
      BoundModel model = bind_model(binding, config);
      encode_sentence_block(tape, model, block);
    }
    counts.flat_entries = attention_entry_counter();
  }

  // Hierarchical: per-block sentence encoders, then the document stack.
  {
    ModelConfig config = probe_config(block_len, blocks, heads, layers);
    ParameterStore store;
    init_parameters(store, config, 7);
    SentenceBlock block = full_block(block_len);
    for (int i = 0; i < batch; ++i) {
      Tape tape;
      TapeBinding binding(tape, store);
      BoundModel model = bind_model(binding, config);

      attention_entry_counter() = 0;
      std::vector<Tensor> reps;
      for (int j = 0; j < blocks; ++j)
        reps.push_back(encode_sentence_block(tape, model, block).block_rep);
      counts.sentence_level_entries += attention_entry_counter();

      attention_entry_counter() = 0;
      std::vector<std::uint8_t> mask(static_cast<size_t>(blocks), 1);
      encode_document(tape, model, concat_rows(reps), mask);
      counts.document_level_entries += attention_entry_counter();
    }
  }
  attention_entry_counter() = 0;
  return counts;
}

bool verify_attention_budget(const AttentionBudget& budget) {
  InstrumentedCounts counts = instrument_attention(budget.tokens, budget.block_len, budget.batch,
                                                   budget.heads, budget.layers);
  return counts.flat_entries == budget.flat_entries &&
         counts.sentence_level_entries == budget.sentence_level_entries &&
         counts.document_level_entries == budget.document_level_entries;
}

}  // namespace smith
