#pragma once

#include <string>

namespace smith {

enum class CombineMode { kNormal, kSumConcat, kMeanConcat, kAttention };

CombineMode combine_mode_from_string(const std::string& s);
std::string to_string(CombineMode mode);

// Architecture hyperparameters. File keys: L1, L2, H, A, Ls, Ld, vocab_size,
// combine_mode, dropout, attn_combine_dim.
struct ModelConfig {
  int sent_layers = 6;      // L1
  int doc_layers = 3;       // L2
  int hidden_size = 256;    // H
  int num_heads = 4;        // A
  int block_len = 32;       // Ls
  int max_blocks = 48;      // Ld
  int vocab_size = 0;
  CombineMode combine_mode = CombineMode::kNormal;
  double dropout = 0.1;
  int combine_dim = 0;      // attention-combine width V; 0 means hidden_size

  int effective_combine_dim() const { return combine_dim > 0 ? combine_dim : hidden_size; }
  // H for normal mode, 2H for the concat modes.
  int embedding_dim() const;

  void validate() const;  // throws std::invalid_argument on bad settings
};

ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::string& path);
std::string format_model_config(const ModelConfig& config);

}  // namespace smith
