#pragma once

#include <string>
#include <vector>

namespace smith {

// Splits text into sentences. A sentence ends at '.', '!' or '?' when the
// terminator is followed by whitespace; trailing text without a terminator
// forms the last sentence. Inter-sentence whitespace is consumed, so the
// concatenation of the returned sentences equals the trimmed input with the
// whitespace between sentences removed.
std::vector<std::string> split_sentences(const std::string& text);

// Lowercased word tokens. Whitespace and ASCII punctuation act as
// separators and are dropped; bytes outside ASCII are kept as word
// characters.
std::vector<std::string> word_tokens(const std::string& text);

}  // namespace smith
