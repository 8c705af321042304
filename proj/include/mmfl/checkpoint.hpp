#pragma once
#include <string>

#include "mmfl/federation.hpp"

namespace mmfl {

// A checkpoint directory holds params.txt (named-tensor archive), profile.txt
// (for profile-carrying methods) and meta.txt (model config + loss weights).
struct Checkpoint {
    GlobalState state;
    double lambda = 0.0;
    double eta = 0.0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& directory);
Checkpoint load_checkpoint(const std::string& directory);

} // namespace mmfl
