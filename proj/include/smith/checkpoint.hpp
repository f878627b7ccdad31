#pragma once

#include <string>

#include "smith/config.hpp"
#include "smith/params.hpp"
#include "smith/vocab.hpp"

namespace smith {

// Checkpoint file layout: a text manifest (format tag, config key=values,
// vocabulary lines, ordered parameter table of name/rows/cols/byte-offset)
// followed by a contiguous little-endian float32 blob. Offsets partition the
// blob exactly. Values are stored as float32, so load(save(p)) equals p
// after one double->float->double round trip.
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const Vocabulary& vocab, const ParameterStore& store);

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
};

// Rebuilds the parameter set from the stored config and fills it from the
// blob. Malformed manifests (unknown or missing parameter, shape mismatch,
// bad offsets, truncated blob) raise descriptive errors.
Checkpoint load_checkpoint(const std::string& path, ParameterStore& store);

// Applies the same float32 quantization a save/load cycle would.
void quantize_parameters(ParameterStore& store);

}  // namespace smith
