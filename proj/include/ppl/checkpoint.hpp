#pragma once

#include <string>

#include "ppl/model.hpp"

namespace ppl {

struct CheckpointMeta {
  int64_t step = 0;
  int epoch = 0;
  std::string config_echo = "{}";  // JSON document
};

// Single-file archive: magic + JSON manifest (named entries with shapes and
// offsets, format version, config echo) + raw float payload. Covers all
// parameter groups, Adam state, and the hierarchical memory.
void save_checkpoint(const std::string& path, const PPLModel& model,
                     const CheckpointMeta& meta);

// Restores into an already-constructed model; shapes must match.
CheckpointMeta load_checkpoint(const std::string& path, PPLModel& model);

// Reads only the manifest (for config recovery before model construction).
std::string read_checkpoint_config(const std::string& path);

}  // namespace ppl
