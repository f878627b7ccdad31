#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smith/corpus_io.hpp"
#include "smith/vocab.hpp"

namespace smith {

// Fixed-capacity unit of block_len token slots. Non-empty blocks start with
// CLS; unused slots are PAD with token_mask 0.
struct SentenceBlock {
  std::vector<int> token_ids;
  std::vector<std::uint8_t> token_mask;
  int real_count = 0;

  bool empty() const { return real_count == 0; }
};

struct SegmentedDocument {
  std::string doc_id;
  std::vector<SentenceBlock> blocks;          // always max_blocks entries
  std::vector<std::uint8_t> block_mask;       // prefix of ones

  int real_block_count() const {
    int n = 0;
    for (auto m : block_mask) n += m;
    return n;
  }
};

// Packs whole sentences into blocks left to right. A sentence moves to the
// next block when it does not fit the remaining capacity; a sentence longer
// than block_len-1 is truncated (head kept) into an empty block. Sentences
// that would start beyond max_blocks are dropped. CLS occupies the first
// slot of every non-empty block. An empty sentence list yields one CLS-only
// block.
SegmentedDocument greedy_fill(const std::vector<std::vector<int>>& sentences, int block_len,
                              int max_blocks, int cls_id = Vocabulary::kCls,
                              int pad_id = Vocabulary::kPad);

// split_sentences + tokenize + greedy_fill.
SegmentedDocument segment_document(const RawDocument& doc, const Vocabulary& vocab,
                                   int block_len, int max_blocks);

// PAD slots over the non-empty blocks; the quantity greedy filling minimizes.
int padded_token_count(const SegmentedDocument& doc);

}  // namespace smith
