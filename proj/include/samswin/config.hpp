#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "samswin/model.hpp"

namespace samswin {

using Json = nlohmann::json;

// Table-4-shaped per-stage training settings.
struct StageConfig {
  int epochs = 30;
  int batch_size = 16;
  int warmup_epochs = 5;
  double base_lr = 3e-4;
  double weight_decay = 0.05;
  std::string schedule = "cosine";
  std::string augmentations = "none";  // none | randaugment
};

// Full declarative run configuration (model + both stages + engine knobs).
struct RunConfig {
  ModelConfig model;  // branch presence flags are overridden per variant
  StageConfig stage1{50, 16, 5, 3e-4, 0.05, "cosine", "none"};
  StageConfig stage2{10, 16, 2, 3e-5, 1e-8, "cosine", "none"};
  double alpha = 1e-3;
  uint64_t seed = 0;
  int threads = 2;
  double grad_clip_norm = 0.0;
  double early_stop_train_acc = 0.0;  // 0 = disabled
  int fallback_size = 0;              // 0 = min(128, image_size)
  std::string segmenter = "oracle";   // oracle | precomputed | center
  std::string mask_dir;
  std::string eval_split = "val";
  std::string init_weights;  // optional pretrained-weight hook

  void validate() const;
  int effective_fallback() const;
};

Json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const Json& j);

Json run_config_to_json(const RunConfig& c);
// Throws Error naming the offending field on invalid values.
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical (sorted-key) serialization.
std::string config_digest(const Json& j);

// Creates root/<command>-<digest8>-s<seed>/ and returns it.
std::string make_run_dir(const std::string& root, const std::string& command,
                         const std::string& digest, uint64_t seed);

// Every run directory contains exactly one run_manifest.json.
struct RunManifest {
  std::string command;
  std::string config_hash;
  uint64_t seed = 0;
  std::string code_version;
  std::vector<std::string> outputs;
  std::string started;
  std::string finished;
};
void write_run_manifest(const RunManifest& m, const std::string& run_dir);
std::string timestamp_utc_now();

}  // namespace samswin
