#pragma once

#include <filesystem>

#include "sama/train.hpp"

namespace sama {

// Checkpoint directory layout:
//   config.json        model/trainer configuration + step counter
//   params/<name>.vt   one container per trainable parameter
//   ema/<name>.vt      EMA shadow values
//   optim/<name>.m.vt / .v.vt   adam moments (when the optimizer is adam)
// Round-trips are bit-exact; loading validates every shape against the
// configuration.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& dir);

}  // namespace sama
