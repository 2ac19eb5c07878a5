#include "samswin/config.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace samswin {

namespace {

// Field-checked readers so config errors name the offending key.
template <typename T>
T get_field(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw Error("config: invalid value for field \"" + key + "\"");
  }
}

void expect_positive(double v, const std::string& field) {
  if (!(v > 0.0)) throw Error("config: field \"" + field + "\" must be positive");
}

StageConfig stage_from_json(const Json& j, const StageConfig& defaults, const std::string& which) {
  StageConfig s = defaults;
  s.epochs = get_field(j, "epochs", s.epochs);
  s.batch_size = get_field(j, "batch_size", s.batch_size);
  s.warmup_epochs = get_field(j, "warmup_epochs", s.warmup_epochs);
  s.base_lr = get_field(j, "base_lr", s.base_lr);
  s.weight_decay = get_field(j, "weight_decay", s.weight_decay);
  s.schedule = get_field(j, "schedule", s.schedule);
  s.augmentations = get_field(j, "augmentations", s.augmentations);
  if (s.epochs < 1) throw Error("config: field \"" + which + ".epochs\" must be >= 1");
  if (s.batch_size < 1) throw Error("config: field \"" + which + ".batch_size\" must be >= 1");
  if (s.warmup_epochs < 0 || s.warmup_epochs >= s.epochs)
    throw Error("config: field \"" + which + ".warmup_epochs\" must satisfy warmup_epochs < epochs");
  expect_positive(s.base_lr, which + ".base_lr");
  if (s.weight_decay < 0) throw Error("config: field \"" + which + ".weight_decay\" must be >= 0");
  if (s.schedule != "cosine") throw Error("config: field \"" + which + ".schedule\" must be \"cosine\"");
  if (s.augmentations != "none" && s.augmentations != "randaugment")
    throw Error("config: field \"" + which + ".augmentations\" must be none|randaugment");
  return s;
}

Json stage_to_json(const StageConfig& s) {
  return Json{{"epochs", s.epochs},
              {"batch_size", s.batch_size},
              {"warmup_epochs", s.warmup_epochs},
              {"base_lr", s.base_lr},
              {"weight_decay", s.weight_decay},
              {"schedule", s.schedule},
              {"augmentations", s.augmentations}};
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (!(alpha > 0.0)) throw Error("config: field \"alpha\" must be positive");
  if (threads < 1) throw Error("config: field \"threads\" must be >= 1");
  if (grad_clip_norm < 0) throw Error("config: field \"grad_clip_norm\" must be >= 0");
  if (early_stop_train_acc < 0 || early_stop_train_acc > 1)
    throw Error("config: field \"early_stop_train_acc\" must be in [0,1]");
  if (fallback_size < 0 || fallback_size > model.backbone.image_size)
    throw Error("config: field \"fallback_size\" must be in 0..image_size");
  if (segmenter != "oracle" && segmenter != "precomputed" && segmenter != "center")
    throw Error("config: field \"segmenter\" must be oracle|precomputed|center");
  if (segmenter == "precomputed" && mask_dir.empty())
    throw Error("config: field \"mask_dir\" is required for the precomputed segmenter");
  if (eval_split != "train" && eval_split != "val" && eval_split != "test")
    throw Error("config: field \"eval_split\" must be train|val|test");
}

int RunConfig::effective_fallback() const {
  if (fallback_size > 0) return fallback_size;
  return std::min(128, model.backbone.image_size);
}

Json model_config_to_json(const ModelConfig& m) {
  const auto& b = m.backbone;
  return Json{{"image_size", b.image_size},
              {"patch_size", b.patch_size},
              {"embed_dim", b.embed_dim},
              {"depths", b.depths},
              {"heads", b.heads},
              {"window_size", b.window_size},
              {"num_classes", b.num_classes},
              {"drop_rate", b.drop_rate},
              {"mlp_ratio", b.mlp_ratio},
              {"block_family", block_family_name(b.family)},
              {"with_wib", m.with_wib},
              {"with_lrb", m.with_lrb},
              {"laem_count", m.laem_count},
              {"laem_out_proj", m.laem_out_proj},
              {"init_seed", m.init_seed}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig m;
  BackboneConfig& b = m.backbone;
  b.image_size = get_field(j, "image_size", b.image_size);
  b.patch_size = get_field(j, "patch_size", b.patch_size);
  b.embed_dim = get_field(j, "embed_dim", b.embed_dim);
  if (j.contains("depths")) {
    auto d = j.at("depths").get<std::vector<int>>();
    if (d.size() != 4) throw Error("config: field \"depths\" must have 4 entries");
    std::copy(d.begin(), d.end(), b.depths.begin());
  }
  if (j.contains("heads")) {
    auto h = j.at("heads").get<std::vector<int>>();
    if (h.size() != 4) throw Error("config: field \"heads\" must have 4 entries");
    std::copy(h.begin(), h.end(), b.heads.begin());
  }
  b.window_size = get_field(j, "window_size", b.window_size);
  b.num_classes = get_field(j, "num_classes", b.num_classes);
  b.drop_rate = get_field(j, "drop_rate", b.drop_rate);
  b.mlp_ratio = get_field(j, "mlp_ratio", b.mlp_ratio);
  b.family = block_family_from_string(get_field<std::string>(j, "block_family", "swinv2"));
  m.with_wib = get_field(j, "with_wib", m.with_wib);
  m.with_lrb = get_field(j, "with_lrb", m.with_lrb);
  m.laem_count = get_field(j, "laem_count", m.laem_count);
  m.laem_out_proj = get_field(j, "laem_out_proj", m.laem_out_proj);
  m.init_seed = get_field(j, "init_seed", m.init_seed);
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return m;
}

Json run_config_to_json(const RunConfig& c) {
  return Json{{"model", model_config_to_json(c.model)},
              {"stage1", stage_to_json(c.stage1)},
              {"stage2", stage_to_json(c.stage2)},
              {"alpha", c.alpha},
              {"seed", c.seed},
              {"threads", c.threads},
              {"grad_clip_norm", c.grad_clip_norm},
              {"early_stop_train_acc", c.early_stop_train_acc},
              {"fallback_size", c.fallback_size},
              {"segmenter", c.segmenter},
              {"mask_dir", c.mask_dir},
              {"eval_split", c.eval_split},
              {"init_weights", c.init_weights}};
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("stage1")) c.stage1 = stage_from_json(j.at("stage1"), c.stage1, "stage1");
  if (j.contains("stage2")) c.stage2 = stage_from_json(j.at("stage2"), c.stage2, "stage2");
  c.alpha = get_field(j, "alpha", c.alpha);
  c.seed = get_field(j, "seed", c.seed);
  c.threads = get_field(j, "threads", c.threads);
  c.grad_clip_norm = get_field(j, "grad_clip_norm", c.grad_clip_norm);
  c.early_stop_train_acc = get_field(j, "early_stop_train_acc", c.early_stop_train_acc);
  c.fallback_size = get_field(j, "fallback_size", c.fallback_size);
  c.segmenter = get_field<std::string>(j, "segmenter", c.segmenter);
  c.mask_dir = get_field<std::string>(j, "mask_dir", c.mask_dir);
  c.eval_split = get_field<std::string>(j, "eval_split", c.eval_split);
  c.init_weights = get_field<std::string>(j, "init_weights", c.init_weights);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open config: " + path);
  Json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw Error("config: parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_digest(const Json& j) {
  std::string s = j.dump();  // nlohmann objects iterate in sorted key order
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string make_run_dir(const std::string& root, const std::string& command,
                         const std::string& digest, uint64_t seed) {
  std::string name = command + "-" + digest.substr(0, 8) + "-s" + std::to_string(seed);
  fs::path dir = fs::path(root) / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  check(fs::is_directory(dir), "cannot create run directory: " + dir.string());
  return dir.string();
}

std::string timestamp_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(const RunManifest& m, const std::string& run_dir) {
  Json j{{"command", m.command},      {"config_hash", m.config_hash},
         {"seed", m.seed},            {"code_version", m.code_version},
         {"outputs", m.outputs},      {"started", m.started},
         {"finished", m.finished}};
  std::ofstream f(fs::path(run_dir) / "run_manifest.json");
  check(f.good(), "cannot write run manifest in " + run_dir);
  f << j.dump(2) << "\n";
}

}  // namespace samswin
