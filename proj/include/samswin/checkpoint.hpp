#pragma once

#include <memory>
#include <string>

#include "samswin/model.hpp"

namespace samswin {

// Versioned single-file archive: magic, a JSON manifest (config plus named
// parameter shapes), then raw little-endian doubles in registration order.
struct CheckpointMeta {
  ModelConfig model;
  std::string variant = "M5";
  int stage = 1;
  uint64_t seed = 0;
  std::string code_version;
};

void save_checkpoint(const std::string& path, const SamSwinModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<SamSwinModel> model;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Weight-loading hook: copies parameters whose name and shape match from the
// archive into an existing model; unmatched entries are skipped. Returns the
// number of tensors loaded.
int load_matching_weights(SamSwinModel& model, const std::string& path);

}  // namespace samswin
