#pragma once

#include <string>

#include "crend/config.hpp"
#include "crend/optim.hpp"
#include "crend/params.hpp"

namespace crend {

// Model snapshot: config text, named parameter tensors, optimizer moments and
// step counter. The binary layout is fixed little-endian, so a save/load
// round trip is bit-exact.
struct Checkpoint {
    TrainConfig config;
    int epoch = 0;
    ParamStore params;
    AdamW optimizer;
};

inline constexpr char kCheckpointMagic[5] = {'C', 'R', 'N', 'D', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws distinct errors for a bad magic, an unsupported version, and a
// truncated file.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace crend
