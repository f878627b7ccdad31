#pragma once

#include <cstdint>
#include <vector>

#include "smith/corpus_io.hpp"

namespace smith {

// Synthetic matching data: every topic owns a disjoint vocabulary, positive
// pairs share a topic, negatives cross topics. Documents walk their topic
// vocabulary cyclically from a random phase, so token order is locally
// predictable. With filler_tokens > 0, each document opens with that many
// tokens drawn from a topic-independent filler vocabulary, pushing the
// discriminative content past the prefix.
struct FixtureOptions {
  int n_pairs = 64;
  int topics = 4;
  int doc_len = 120;        // tokens per document
  int filler_tokens = 0;    // topic-neutral prefix length
  int words_per_topic = 48;
  std::uint64_t seed = 1;
};

struct FixtureData {
  std::vector<PairRecord> pairs;
  std::vector<RawDocument> docs;  // the 2 * n_pairs generated documents
};

FixtureData generate_fixture(const FixtureOptions& options);

}  // namespace smith
