#pragma once

#include <string>

#include "binnet/train.hpp"

namespace binnet {

/// Binary checkpoint, magic "BNNC" version 1, little-endian fixed-width
/// fields. Captures the full training state (config echo, layer parameters,
/// optimizer velocities, learning rate, epoch index and the stochastic
/// stream), so a resumed run replays bit-identically.
void save_checkpoint(const std::string& path, TrainState& state);

TrainState load_checkpoint(const std::string& path);

}  // namespace binnet
