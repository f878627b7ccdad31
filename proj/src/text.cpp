#include "smith/text.hpp"

#include <cctype>

namespace smith {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  const size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    if (i >= n) break;
    size_t start = i;
    size_t end = n;
    for (size_t j = i; j < n; ++j) {
      if (is_terminator(text[j]) && (j + 1 == n || is_space(text[j + 1]))) {
        end = j + 1;
        break;
      }
    }
    size_t last = end;
    while (last > start && is_space(text[last - 1])) --last;
    if (last > start) sentences.push_back(text.substr(start, last - start));
    i = end;
  }
  return sentences;
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (is_space(c) || is_punct(c)) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
      continue;
    }
    cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

}  // namespace smith
