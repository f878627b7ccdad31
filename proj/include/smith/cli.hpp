#pragma once

#include <string>
#include <vector>

namespace smith {

// Dispatches one of: build-vocab, segment, pretrain, finetune, embed, eval,
// profile-attention, generate-fixture. args includes the program name.
// Returns 0 on success, 2 for usage errors, 1 for runtime failures.
int run_command(const std::vector<std::string>& args);

}  // namespace smith
