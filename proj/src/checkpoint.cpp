#include "smith/checkpoint.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "smith/encoder.hpp"

namespace smith {

namespace {

constexpr const char* kMagic = "smith-checkpoint 1";

std::string read_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": unexpected end of manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const Vocabulary& vocab, const ParameterStore& store) {
  std::ostringstream manifest;
  manifest << kMagic << '\n';

  const std::string config_text = format_model_config(config);
  size_t config_lines = 0;
  for (char c : config_text) config_lines += c == '\n';
  manifest << "config " << config_lines << '\n' << config_text;

  manifest << "vocab " << vocab.size() << '\n';
  for (const auto& token : vocab.tokens()) manifest << token << '\n';

  manifest << "params " << store.count() << '\n';
  std::uint64_t offset = 0;
  for (const auto& p : store.all()) {
    manifest << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << ' ' << offset
             << '\n';
    offset += static_cast<std::uint64_t>(p->value.size()) * sizeof(float);
  }
  manifest << "blob " << offset << '\n';

  std::vector<float> blob;
  blob.reserve(offset / sizeof(float));
  for (const auto& p : store.all())
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      blob.push_back(static_cast<float>(p->value.data()[i]));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
    const std::string header = manifest.str();
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed for checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path, ParameterStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  if (read_line(in, path) != kMagic)
    throw std::runtime_error(path + ": not a checkpoint file (bad magic line)");

  auto expect_section = [&](const char* name) -> std::uint64_t {
    std::istringstream header(read_line(in, path));
    std::string tag;
    std::uint64_t count = 0;
    if (!(header >> tag >> count) || tag != name)
      throw std::runtime_error(path + ": malformed manifest, expected section " +
                               std::string(name));
    return count;
  };

  Checkpoint ckpt;
  const std::uint64_t config_lines = expect_section("config");
  std::ostringstream config_text;
  for (std::uint64_t i = 0; i < config_lines; ++i) config_text << read_line(in, path) << '\n';
  ckpt.config = parse_model_config(config_text.str());
  ckpt.config.validate();

  const std::uint64_t vocab_count = expect_section("vocab");
  {
    std::vector<std::string> lines;
    for (std::uint64_t i = 0; i < vocab_count; ++i) lines.push_back(read_line(in, path));
    Vocabulary vocab;
    if (lines.size() < static_cast<size_t>(Vocabulary::kNumSpecial))
      throw std::runtime_error(path + ": vocabulary section too short");
    for (int i = 0; i < Vocabulary::kNumSpecial; ++i)
      if (lines[static_cast<size_t>(i)] != vocab.token(i))
        throw std::runtime_error(path + ": vocabulary must start with the special tokens");
    for (size_t i = Vocabulary::kNumSpecial; i < lines.size(); ++i) vocab.add(lines[i]);
    ckpt.vocab = vocab;
  }
  if (ckpt.vocab.size() != ckpt.config.vocab_size)
    throw std::runtime_error(path + ": vocabulary size disagrees with config");

  if (store.count() != 0) throw std::invalid_argument("load_checkpoint needs an empty store");
  init_parameters(store, ckpt.config, /*seed=*/0);

  struct Entry {
    std::string name;
    Eigen::Index rows, cols;
    std::uint64_t offset;
  };
  const std::uint64_t param_count = expect_section("params");
  if (param_count != store.count())
    throw std::runtime_error(path + ": manifest lists " + std::to_string(param_count) +
                             " parameters, model needs " + std::to_string(store.count()));
  std::vector<Entry> entries;
  std::uint64_t expected_offset = 0;
  for (std::uint64_t i = 0; i < param_count; ++i) {
    std::istringstream line(read_line(in, path));
    Entry e;
    if (!(line >> e.name >> e.rows >> e.cols >> e.offset))
      throw std::runtime_error(path + ": malformed parameter table line " + std::to_string(i));
    if (!store.contains(e.name))
      throw std::runtime_error(path + ": unknown parameter name " + e.name);
    const Parameter& p = store.at(e.name);
    if (p.value.rows() != e.rows || p.value.cols() != e.cols)
      throw std::runtime_error(path + ": shape mismatch for parameter " + e.name +
                               " (manifest " + std::to_string(e.rows) + "x" +
                               std::to_string(e.cols) + ", model " +
                               std::to_string(p.value.rows()) + "x" +
                               std::to_string(p.value.cols()) + ")");
    if (e.offset != expected_offset)
      throw std::runtime_error(path + ": blob offset for parameter " + e.name +
                               " does not partition the blob");
    expected_offset += static_cast<std::uint64_t>(e.rows * e.cols) * sizeof(float);
    entries.push_back(std::move(e));
  }

  const std::uint64_t blob_bytes = expect_section("blob");
  if (blob_bytes != expected_offset)
    throw std::runtime_error(path + ": blob size " + std::to_string(blob_bytes) +
                             " does not match parameter table total " +
                             std::to_string(expected_offset));

  std::vector<float> blob(blob_bytes / sizeof(float));
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_bytes));
  if (static_cast<std::uint64_t>(in.gcount()) != blob_bytes)
    throw std::runtime_error(path + ": truncated blob (expected " + std::to_string(blob_bytes) +
                             " bytes, read " + std::to_string(in.gcount()) + ")");

  for (const auto& e : entries) {
    Parameter& p = store.at(e.name);
    const float* src = blob.data() + e.offset / sizeof(float);
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      p.value.data()[i] = static_cast<double>(src[i]);
  }
  return ckpt;
}

void quantize_parameters(ParameterStore& store) {
  for (auto& p : store.all())
    for (Eigen::Index i = 0; i < p->value.size(); ++i)
      p->value.data()[i] = static_cast<double>(static_cast<float>(p->value.data()[i]));
}

}  // namespace smith
