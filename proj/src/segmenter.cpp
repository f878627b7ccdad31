#include "smith/segmenter.hpp"

#include <stdexcept>

#include "smith/text.hpp"

namespace smith {

namespace {

SentenceBlock empty_block(int block_len, int pad_id) {
  SentenceBlock b;
  b.token_ids.assign(static_cast<size_t>(block_len), pad_id);
  b.token_mask.assign(static_cast<size_t>(block_len), 0);
  b.real_count = 0;
  return b;
}

void begin_block(SentenceBlock& b, int cls_id) {
  b.token_ids[0] = cls_id;
  b.token_mask[0] = 1;
  b.real_count = 1;
}

}  // namespace

SegmentedDocument greedy_fill(const std::vector<std::vector<int>>& sentences, int block_len,
                              int max_blocks, int cls_id, int pad_id) {
  if (block_len < 2) throw std::invalid_argument("block_len must be at least 2");
  if (max_blocks < 1) throw std::invalid_argument("max_blocks must be at least 1");

  SegmentedDocument doc;
  doc.blocks.assign(static_cast<size_t>(max_blocks), empty_block(block_len, pad_id));
  doc.block_mask.assign(static_cast<size_t>(max_blocks), 0);

  const int capacity = block_len - 1;  // one slot reserved for CLS
  int cur = 0;
  begin_block(doc.blocks[0], cls_id);
  doc.block_mask[0] = 1;

  for (const auto& sentence : sentences) {
    const int len = static_cast<int>(sentence.size());
    int take = len;
    SentenceBlock* block = &doc.blocks[static_cast<size_t>(cur)];
    int remaining = block_len - block->real_count;
    if (len > remaining) {
      // Does not fit here; move to the next block, truncating if the
      // sentence exceeds a whole block on its own.
      if (block->real_count > 1) {
        ++cur;
        if (cur >= max_blocks) break;
        block = &doc.blocks[static_cast<size_t>(cur)];
        begin_block(*block, cls_id);
        doc.block_mask[static_cast<size_t>(cur)] = 1;
      }
      if (len > capacity) take = capacity;
    }
    for (int j = 0; j < take; ++j) {
      block->token_ids[static_cast<size_t>(block->real_count)] = sentence[static_cast<size_t>(j)];
      block->token_mask[static_cast<size_t>(block->real_count)] = 1;
      ++block->real_count;
    }
  }
  return doc;
}

SegmentedDocument segment_document(const RawDocument& doc, const Vocabulary& vocab,
                                   int block_len, int max_blocks) {
  std::vector<std::vector<int>> sentences;
  for (const auto& s : split_sentences(doc.text)) sentences.push_back(tokenize(s, vocab));
  SegmentedDocument segmented = greedy_fill(sentences, block_len, max_blocks);
  segmented.doc_id = doc.id;
  return segmented;
}

int padded_token_count(const SegmentedDocument& doc) {
  int pads = 0;
  for (size_t i = 0; i < doc.blocks.size(); ++i) {
    if (!doc.block_mask[i]) continue;
    pads += static_cast<int>(doc.blocks[i].token_ids.size()) - doc.blocks[i].real_count;
  }
  return pads;
}

}  // namespace smith
