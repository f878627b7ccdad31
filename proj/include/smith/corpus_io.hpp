#pragma once

#include <functional>
#include <string>
#include <vector>

namespace smith {

struct RawDocument {
  std::string id;
  std::string text;
};

struct PairRecord {
  RawDocument source;
  RawDocument target;
  int label = 0;  // 0 or 1
};

// Line-delimited JSON readers. Ids must be non-empty and unique within a
// file; labels must be 0 or 1. Violations throw with the offending line
// number.
std::vector<RawDocument> read_corpus(const std::string& path);
void for_each_document(const std::string& path,
                       const std::function<void(const RawDocument&)>& fn);
std::vector<PairRecord> read_pairs(const std::string& path);

void write_corpus(const std::string& path, const std::vector<RawDocument>& docs);
void write_pairs(const std::string& path, const std::vector<PairRecord>& pairs);

// Writes to a temp file in the same directory, then renames over the target.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace smith
