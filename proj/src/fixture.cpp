#include "smith/fixture.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace smith {

namespace {

constexpr int kFillerWords = 48;
constexpr int kMinSentenceWords = 5;
constexpr int kMaxSentenceWords = 9;

std::string topic_word(int topic, int k) {
  return "topic" + std::to_string(topic) + "word" + std::to_string(k);
}

std::string filler_word(int k) { return "filler" + std::to_string(k); }

// One continuous cyclic walk over the topic vocabulary (preceded by a walk
// over the filler vocabulary), chopped into 5-9 word sentences. The walk
// starts at a random phase, so word order is locally predictable while
// documents of one topic still differ.
std::string make_text(int topic, int total_tokens, int filler_tokens, int words_per_topic,
                      std::mt19937_64& rng) {
  std::uniform_int_distribution<int> sentence_len(kMinSentenceWords, kMaxSentenceWords);
  int topic_pos = std::uniform_int_distribution<int>(0, words_per_topic - 1)(rng);
  int filler_pos = std::uniform_int_distribution<int>(0, kFillerWords - 1)(rng);

  std::string text;
  int emitted = 0;
  while (emitted < total_tokens) {
    const int len = std::min(sentence_len(rng), total_tokens - emitted);
    for (int i = 0; i < len; ++i) {
      if (!text.empty()) text += ' ';
      if (emitted < filler_tokens) {
        text += filler_word(filler_pos++ % kFillerWords);
      } else {
        text += topic_word(topic, topic_pos++ % words_per_topic);
      }
      ++emitted;
    }
    text += '.';
  }
  return text;
}

}  // namespace

FixtureData generate_fixture(const FixtureOptions& options) {
  if (options.topics < 2) throw std::invalid_argument("fixture needs at least two topics");
  if (options.n_pairs < 1) throw std::invalid_argument("fixture needs at least one pair");
  if (options.doc_len < 1) throw std::invalid_argument("doc_len must be positive");
  if (options.words_per_topic < 2)
    throw std::invalid_argument("words_per_topic must be at least 2");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> pick_topic(0, options.topics - 1);

  FixtureData data;
  int next_doc = 0;
  auto make_doc = [&](int topic) {
    RawDocument doc;
    doc.id = "doc" + std::to_string(next_doc++);
    doc.text = make_text(topic, options.doc_len, options.filler_tokens,
                         options.words_per_topic, rng);
    data.docs.push_back(doc);
    return doc;
  };

  for (int i = 0; i < options.n_pairs; ++i) {
    PairRecord rec;
    rec.label = i % 2 == 0 ? 1 : 0;  // alternating keeps the split balanced
    const int topic_a = pick_topic(rng);
    int topic_b = topic_a;
    if (rec.label == 0) {
      while (topic_b == topic_a) topic_b = pick_topic(rng);
    }
    rec.source = make_doc(topic_a);
    rec.target = make_doc(topic_b);
    data.pairs.push_back(std::move(rec));
  }
  return data;
}

}  // namespace smith
