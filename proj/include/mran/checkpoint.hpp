#pragma once

#include <string>

#include "mran/model.hpp"

namespace mran {

// Flat binary container: magic, a config-echo text block, then each named
// parameter as (name, shape, row-major 64-bit floats), little-endian.
// save(load(f)) is byte-identical to f.
void save_checkpoint(const MranModel& model, const std::string& config_echo,
                     const std::string& path);

struct Checkpoint {
  std::string config_echo;
  std::vector<std::pair<std::string, Tensor>> params;
};

Checkpoint read_checkpoint(const std::string& path);

// Loads parameter values into an existing model; names and shapes must match.
void load_checkpoint(MranModel& model, const std::string& path, std::string* config_echo = nullptr);

}  // namespace mran
