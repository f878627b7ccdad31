#include "smith/corpus_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace smith {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::string& path, size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed JSON record");
  return j;
}

std::string required_string(const json& j, const char* key, const std::string& path,
                            size_t lineno) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing string field \"" +
                             key + "\"");
  return j.at(key).get<std::string>();
}

}  // namespace

void for_each_document(const std::string& path,
                       const std::function<void(const RawDocument&)>& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::unordered_set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    RawDocument doc{required_string(j, "id", path, lineno),
                    required_string(j, "text", path, lineno)};
    if (doc.id.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty document id");
    if (!seen.insert(doc.id).second)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate document id " +
                               doc.id);
    fn(doc);
  }
}

std::vector<RawDocument> read_corpus(const std::string& path) {
  std::vector<RawDocument> docs;
  for_each_document(path, [&](const RawDocument& d) { docs.push_back(d); });
  return docs;
}

std::vector<PairRecord> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pair file: " + path);
  std::vector<PairRecord> pairs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    PairRecord rec;
    rec.source.id = required_string(j, "source_id", path, lineno);
    rec.source.text = required_string(j, "source_text", path, lineno);
    rec.target.id = required_string(j, "target_id", path, lineno);
    rec.target.text = required_string(j, "target_text", path, lineno);
    if (rec.source.id.empty() || rec.target.id.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty document id");
    if (!j.contains("label") || !j.at("label").is_number_integer())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing integer label");
    rec.label = j.at("label").get<int>();
    if (rec.label != 0 && rec.label != 1)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    pairs.push_back(std::move(rec));
  }
  return pairs;
}

void write_corpus(const std::string& path, const std::vector<RawDocument>& docs) {
  std::ostringstream out;
  for (const auto& d : docs) {
    json j{{"id", d.id}, {"text", d.text}};
    out << j.dump() << '\n';
  }
  atomic_write(path, out.str());
}

void write_pairs(const std::string& path, const std::vector<PairRecord>& pairs) {
  std::ostringstream out;
  for (const auto& p : pairs) {
    json j{{"source_id", p.source.id},
           {"source_text", p.source.text},
           {"target_id", p.target.id},
           {"target_text", p.target.text},
           {"label", p.label}};
    out << j.dump() << '\n';
  }
  atomic_write(path, out.str());
}

void atomic_write(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + tmp);
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace smith
