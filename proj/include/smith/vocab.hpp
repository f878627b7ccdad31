#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace smith {

// Token/id bijection with four reserved ids at the front. lookup() never
// fails; unknown tokens map to kUnk.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kMask = 3;
  static constexpr int kNumSpecial = 4;

  Vocabulary();

  int lookup(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Appends a non-special token; id = previous size. Throws on duplicates.
  int add(const std::string& token);

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Streaming frequency counter; shards can be merged before finish() since
// counts are additive and the tie-break is deterministic.
class VocabBuilder {
 public:
  void add_text(const std::string& text);
  void merge(const VocabBuilder& other);

  // Keeps the most frequent tokens with count >= min_count, capped at
  // max_size total entries including the specials. Ties break
  // lexicographically.
  Vocabulary finish(int max_size, int min_count) const;

 private:
  std::map<std::string, std::int64_t> counts_;
};

// Lowercased word ids for one sentence; out-of-vocabulary tokens map to kUnk.
std::vector<int> tokenize(const std::string& sentence, const Vocabulary& vocab);

}  // namespace smith
