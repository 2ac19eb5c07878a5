#pragma once

#include <array>
#include <string>
#include <vector>

#include "samswin/checkpoint.hpp"
#include "samswin/config.hpp"
#include "samswin/locator.hpp"
#include "samswin/model.hpp"
#include "samswin/report.hpp"
#include "samswin/synthdata.hpp"

namespace samswin {

// Flattened per-run training settings (one stage of the two-stage recipe).
struct TrainConfig {
  int stage = 1;  // 1 or 2; stage 1 must run without CAG, stage 2 with it
  int epochs = 30;
  int batch_size = 16;
  int warmup_epochs = 5;
  double base_lr = 3e-4;
  double weight_decay = 0.05;
  std::string schedule = "cosine";
  std::string augmentations = "none";
  bool cag_enabled = false;
  uint64_t seed = 0;
  double alpha = 1e-3;
  int threads = 2;
  double grad_clip_norm = 0.0;
  double early_stop_train_acc = 0.0;
  std::string segmenter = "oracle";
  std::string mask_dir;
  int fallback_size = 128;
  std::string init_weights;  // optional pretrained hook (lenient name matching)

  void validate() const;
};

TrainConfig train_config_for_stage(const RunConfig& rc, int stage);

// Table 5 variant definitions.
struct AblationVariant {
  std::string name;
  bool wib = true, lrb = true, ms_laem = true, cag = true;

  static AblationVariant from_name(const std::string& name);  // M1..M5
  static std::array<AblationVariant, 5> all();
};

// Assembles the model configuration for a variant (branch presence, LAEM).
ModelConfig model_config_for_variant(const ModelConfig& base, const AblationVariant& v,
                                     uint64_t seed);

struct TrainResult {
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string log_path;
  double best_val_macro_f1 = 0.0;
  int best_epoch = -1;
  double final_train_acc = 0.0;
  int epochs_run = 0;
};

// Two-stage-aware training run: writes train_log.jsonl plus best/last
// checkpoints into out_dir. Deterministic given cfg.seed (fixed per-epoch
// permutations, fixed thread partitioning).
TrainResult train(const AblationVariant& variant, const TrainConfig& cfg,
                  const ModelConfig& model_base, const DatasetManifest& data,
                  const std::string& out_dir, const std::string& init_checkpoint = "");

struct EvalOptions {
  int threads = 2;
  std::string segmenter = "oracle";
  std::string mask_dir;
  int fallback_size = 128;
};

// Localization + forward over a split with augmentation off; no training
// state is touched. Errors on an empty split.
MetricsReport evaluate(const SamSwinModel& model, const DatasetManifest& data, Split split,
                       const EvalOptions& opt);
MetricsReport evaluate_checkpoint(const std::string& checkpoint_path, const DatasetManifest& data,
                                  Split split, const EvalOptions& opt);

// ---------------------------------------------------------------------------
// experiment protocol runners
// ---------------------------------------------------------------------------

struct TableRow {
  std::string setting;
  double setting_value = 0.0;  // numeric sweep value when applicable
  MetricsReport metrics;
};

// Trains and evaluates M1..M5 under identical seed and data; emits the
// Table-5-shaped rows (7 metric columns each).
std::vector<TableRow> run_ablation(const DatasetManifest& data, const RunConfig& rc,
                                   const std::string& out_dir);

// LAEM-count sweep, n in 0..4 activating stages later-to-earlier.
std::vector<TableRow> sweep_laem(const DatasetManifest& data, const RunConfig& rc,
                                 const std::vector<int>& n_values, const std::string& out_dir);

// CAG weight sweep over the alpha grid (default {1e-1,1e-2,1e-3,1e-4}).
std::vector<TableRow> sweep_alpha(const DatasetManifest& data, const RunConfig& rc,
                                  const std::vector<double>& alphas, const std::string& out_dir);

// Writes <stem>.tsv, <stem>.txt and <stem>.jsonl.
void write_table(const std::vector<TableRow>& rows, const std::string& setting_col,
                 const std::string& stem);

}  // namespace samswin
