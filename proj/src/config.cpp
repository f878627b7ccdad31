#include "smith/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace smith {

CombineMode combine_mode_from_string(const std::string& s) {
  if (s == "normal") return CombineMode::kNormal;
  if (s == "sum_concat") return CombineMode::kSumConcat;
  if (s == "mean_concat") return CombineMode::kMeanConcat;
  if (s == "attention") return CombineMode::kAttention;
  throw std::invalid_argument("unknown combine_mode: " + s);
}

std::string to_string(CombineMode mode) {
  switch (mode) {
    case CombineMode::kNormal: return "normal";
    case CombineMode::kSumConcat: return "sum_concat";
    case CombineMode::kMeanConcat: return "mean_concat";
    case CombineMode::kAttention: return "attention";
  }
  throw std::invalid_argument("invalid combine mode value");
}

int ModelConfig::embedding_dim() const {
  return combine_mode == CombineMode::kNormal ? hidden_size : 2 * hidden_size;
}

void ModelConfig::validate() const {
  if (sent_layers < 1 || doc_layers < 1)
    throw std::invalid_argument("layer counts must be at least 1");
  if (hidden_size < 1) throw std::invalid_argument("hidden size must be positive");
  if (num_heads < 1 || hidden_size % num_heads != 0)
    throw std::invalid_argument("hidden size must be divisible by the head count");
  if (block_len < 2) throw std::invalid_argument("block length must be at least 2");
  if (max_blocks < 1) throw std::invalid_argument("max blocks must be at least 1");
  if (vocab_size < 5) throw std::invalid_argument("vocab size must be at least 5");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  if (combine_dim < 0) throw std::invalid_argument("attn_combine_dim must be non-negative");
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    std::string key = line.substr(start, eq - start);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);

    try {
      if (key == "L1") config.sent_layers = std::stoi(value);
      else if (key == "L2") config.doc_layers = std::stoi(value);
      else if (key == "H") config.hidden_size = std::stoi(value);
      else if (key == "A") config.num_heads = std::stoi(value);
      else if (key == "Ls") config.block_len = std::stoi(value);
      else if (key == "Ld") config.max_blocks = std::stoi(value);
      else if (key == "vocab_size") config.vocab_size = std::stoi(value);
      else if (key == "combine_mode") config.combine_mode = combine_mode_from_string(value);
      else if (key == "dropout") config.dropout = std::stod(value);
      else if (key == "attn_combine_dim") config.combine_dim = std::stoi(value);
      else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad value for " +
                                  key);
    }
  }
  return config;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config(buf.str());
}

std::string format_model_config(const ModelConfig& config) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "L1=" << config.sent_layers << '\n';
  out << "L2=" << config.doc_layers << '\n';
  out << "H=" << config.hidden_size << '\n';
  out << "A=" << config.num_heads << '\n';
  out << "Ls=" << config.block_len << '\n';
  out << "Ld=" << config.max_blocks << '\n';
  out << "vocab_size=" << config.vocab_size << '\n';
  out << "combine_mode=" << to_string(config.combine_mode) << '\n';
  out << "dropout=" << config.dropout << '\n';
  out << "attn_combine_dim=" << config.combine_dim << '\n';
  return out.str();
}

}  // namespace smith
