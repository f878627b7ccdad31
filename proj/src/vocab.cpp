#include "smith/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "smith/text.hpp"

namespace smith {

namespace {
const char* kSpecialTokens[Vocabulary::kNumSpecial] = {"[PAD]", "[UNK]", "[CLS]", "[MASK]"};
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecial; ++i) {
    tokens_.emplace_back(kSpecialTokens[i]);
    index_.emplace(kSpecialTokens[i], i);
  }
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::add(const std::string& token) {
  if (index_.count(token)) throw std::invalid_argument("duplicate vocabulary token: " + token);
  int id = size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < kNumSpecial) {
      if (line != kSpecialTokens[lineno])
        throw std::runtime_error("vocabulary file " + path + ": line " +
                                 std::to_string(lineno + 1) + " must be " +
                                 kSpecialTokens[lineno]);
    } else {
      if (!line.empty()) vocab.add(line);
    }
    ++lineno;
  }
  if (lineno < kNumSpecial)
    throw std::runtime_error("vocabulary file " + path + ": missing special tokens");
  return vocab;
}

void VocabBuilder::add_text(const std::string& text) {
  for (const auto& tok : word_tokens(text)) ++counts_[tok];
}

void VocabBuilder::merge(const VocabBuilder& other) {
  for (const auto& [tok, n] : other.counts_) counts_[tok] += n;
}

Vocabulary VocabBuilder::finish(int max_size, int min_count) const {
  if (max_size < Vocabulary::kNumSpecial + 1)
    throw std::invalid_argument("vocabulary max_size must be at least 5");
  std::vector<std::pair<std::string, std::int64_t>> entries;
  entries.reserve(counts_.size());
  for (const auto& [tok, n] : counts_)
    if (n >= min_count) entries.emplace_back(tok, n);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  const size_t cap = static_cast<size_t>(max_size - Vocabulary::kNumSpecial);
  for (size_t i = 0; i < entries.size() && i < cap; ++i) vocab.add(entries[i].first);
  return vocab;
}

std::vector<int> tokenize(const std::string& sentence, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& tok : word_tokens(sentence)) ids.push_back(vocab.lookup(tok));
  return ids;
}

}  // namespace smith
