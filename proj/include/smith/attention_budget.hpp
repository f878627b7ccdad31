#pragma once

#include <cstdint>

namespace smith {

// Score-matrix element counts for a flat encoder versus the two-level
// hierarchy at the same total token count. When block_len does not divide
// the token count, the input is padded up to the next block boundary and
// the padded entries are counted too.
struct AttentionBudget {
  int tokens = 0;         // requested N
  int padded_tokens = 0;  // N rounded up to a block multiple
  int block_len = 0;
  int batch = 0;
  int heads = 0;
  int layers = 0;
  std::uint64_t flat_entries = 0;            // b*A*N^2*L
  std::uint64_t sentence_level_entries = 0;  // b*A*Ls^2*(N/Ls)*L
  std::uint64_t document_level_entries = 0;  // b*A*(N/Ls)^2*L
  std::uint64_t hierarchical_total = 0;
  std::uint64_t flat_bytes = 0;  // float32 entries
  std::uint64_t hierarchical_bytes = 0;
  double reduction_factor = 0.0;
};

AttentionBudget count_attention_entries(int tokens, int block_len, int batch, int heads,
                                        int layers);

struct InstrumentedCounts {
  std::uint64_t flat_entries = 0;
  std::uint64_t sentence_level_entries = 0;
  std::uint64_t document_level_entries = 0;
};

// Runs real forward passes over a toy model of the given geometry with the
// score-matrix counter enabled: a single-block encoder at full width for the
// flat count, and the two-level encoder for the hierarchical counts.
InstrumentedCounts instrument_attention(int tokens, int block_len, int batch, int heads,
                                        int layers);

// True when instrument_attention reproduces the closed forms exactly.
bool verify_attention_budget(const AttentionBudget& budget);

}  // namespace smith
