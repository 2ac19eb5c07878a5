// samswin command-line front end. Wires every subcommand to the shared
// library's C API; all heavy lifting happens behind samswin.h.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "samswin/samswin.h"

using Json = nlohmann::json;

namespace {

std::string default_out_root() {
  const char* env = std::getenv("SAMSWIN_OUT");
  return env && *env ? env : "runs";
}

// Config file + --set overrides, flags winning over the file.
Json merged_config(const std::string& config_path, const std::vector<std::string>& sets,
                   long long seed, bool seed_given) {
  Json cfg = Json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f.good()) {
      std::fprintf(stderr, "error: cannot open config file: %s\n", config_path.c_str());
      std::exit(2);
    }
    try {
      f >> cfg;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: config parse failure in %s: %s\n", config_path.c_str(),
                   e.what());
      std::exit(2);
    }
  }
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got \"%s\"\n", kv.c_str());
      std::exit(2);
    }
    std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    Json parsed;
    try {
      parsed = Json::parse(val);
    } catch (...) {
      parsed = val;  // bare strings allowed
    }
    cfg[Json::json_pointer(pointer)] = parsed;
  }
  if (seed_given) cfg["seed"] = seed;
  return cfg;
}

int status_to_exit(ss_status s) { return s == SS_ERR_INVALID_ARGUMENT ? 2 : 1; }

int finish(ss_context* ctx, ss_status st, char* run_dir, const char* what) {
  if (st != SS_OK) {
    std::fprintf(stderr, "error: %s failed: %s\n", what, ss_last_error(ctx));
    int code = status_to_exit(st);
    ss_context_destroy(ctx);
    return code;
  }
  if (run_dir) {
    std::printf("%s\n", run_dir);
    ss_string_free(run_dir);
  }
  ss_context_destroy(ctx);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samswin: dual-branch lesion classification pipeline"};
  app.require_subcommand(1);

  std::string out_root = default_out_root();
  std::string config_path, manifest, variant = "M5", ckpt, split = "val", init_ckpt;
  std::string segmenter = "oracle", mask_dir, what, tap = "wib", sample_id;
  std::vector<std::string> sets;
  long long seed = 0;
  int per_class = 20, size = 64, stage = 1, count = 16, query = -1;
  double val_fraction = 0.0, perplexity = 10.0;
  bool report_iou = false;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen->add_option("--out", out_root, "output directory")->required();
  gen->add_option("--per-class", per_class, "samples per class")->required();
  gen->add_option("--size", size, "image side in pixels")->required();
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--val-fraction", val_fraction, "stratified validation fraction (0 = none)");

  auto* seg = app.add_subcommand("segment", "localization report over a manifest");
  seg->add_option("--manifest", manifest)->required();
  seg->add_option("--segmenter", segmenter, "oracle|precomputed|center");
  seg->add_option("--mask-dir", mask_dir, "precomputed mask directory");
  seg->add_option("--split", split, "train|val|test");
  seg->add_flag("--report-iou", report_iou, "IoU/Dice against ground-truth masks");
  seg->add_option("--out", out_root, "output root");

  auto* tr = app.add_subcommand("train", "train one stage of a variant");
  tr->add_option("--config", config_path, "JSON config file");
  tr->add_option("--manifest", manifest)->required();
  tr->add_option("--variant", variant, "M1..M5");
  tr->add_option("--stage", stage, "1 or 2")->check(CLI::Range(1, 2));
  tr->add_option("--init-ckpt", init_ckpt, "stage-one checkpoint (stage 2)");
  tr->add_option("--seed", seed, "overrides config seed");
  tr->add_option("--set", sets, "config override key=value (flags win)");
  tr->add_option("--out", out_root, "output root");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--manifest", manifest)->required();
  ev->add_option("--split", split, "train|val|test");
  ev->add_option("--out", out_root, "output root");

  auto* ab = app.add_subcommand("ablate", "run the M1..M5 ablation table");
  ab->add_option("--config", config_path, "JSON config file");
  ab->add_option("--manifest", manifest)->required();
  ab->add_option("--seed", seed, "overrides config seed");
  ab->add_option("--set", sets, "config override key=value");
  ab->add_option("--out", out_root, "output root");

  auto* sw = app.add_subcommand("sweep", "LAEM-count or alpha sweep");
  sw->add_option("--what", what, "laem|alpha")->required();
  sw->add_option("--config", config_path, "JSON config file");
  sw->add_option("--manifest", manifest)->required();
  sw->add_option("--seed", seed, "overrides config seed");
  sw->add_option("--set", sets, "config override key=value");
  sw->add_option("--out", out_root, "output root");

  auto* vz = app.add_subcommand("visualize", "grad-cam, t-SNE or attention dumps");
  vz->add_option("--what", what, "gradcam|tsne|attention")->required();
  vz->add_option("--ckpt", ckpt)->required();
  vz->add_option("--manifest", manifest)->required();
  vz->add_option("--split", split, "train|val|test");
  vz->add_option("--tap", tap, "wib|lrb (gradcam)");
  vz->add_option("--count", count, "max samples (gradcam)");
  vz->add_option("--sample", sample_id, "sample image id (attention)");
  vz->add_option("--query", query, "query token index (attention)");
  vz->add_option("--perplexity", perplexity, "t-SNE perplexity");
  vz->add_option("--seed", seed, "visualization seed");
  vz->add_option("--out", out_root, "output root");

  CLI11_PARSE(app, argc, argv);

  ss_context* ctx = nullptr;
  if (ss_context_create(&ctx) != SS_OK) {
    std::fprintf(stderr, "error: cannot create context\n");
    return 1;
  }

  const auto parsed = app.get_subcommands();
  bool seed_given = false;
  if (!parsed.empty()) {
    const CLI::Option* seed_opt = parsed.front()->get_option_no_throw("--seed");
    seed_given = seed_opt != nullptr && seed_opt->count() > 0;
  }

  if (gen->parsed()) {
    char* manifest_path = nullptr;
    ss_status st = ss_generate_data(ctx, out_root.c_str(), per_class, size,
                                    static_cast<uint64_t>(seed), val_fraction, &manifest_path);
    return finish(ctx, st, manifest_path, "gen-data");
  }
  if (seg->parsed()) {
    char* run_dir = nullptr;
    ss_status st = ss_segment_report(ctx, manifest.c_str(), split.c_str(), segmenter.c_str(),
                                     mask_dir.empty() ? nullptr : mask_dir.c_str(),
                                     report_iou ? 1 : 0, out_root.c_str(), &run_dir);
    return finish(ctx, st, run_dir, "segment");
  }
  if (tr->parsed()) {
    std::string cfg = merged_config(config_path, sets, seed, seed_given).dump();
    char* run_dir = nullptr;
    ss_status st = ss_train(ctx, cfg.c_str(), manifest.c_str(), variant.c_str(), stage,
                            init_ckpt.empty() ? nullptr : init_ckpt.c_str(), out_root.c_str(),
                            &run_dir);
    return finish(ctx, st, run_dir, "train");
  }
  if (ev->parsed()) {
    char* run_dir = nullptr;
    ss_status st = ss_evaluate(ctx, ckpt.c_str(), manifest.c_str(), split.c_str(),
                               out_root.c_str(), &run_dir);
    return finish(ctx, st, run_dir, "eval");
  }
  if (ab->parsed()) {
    std::string cfg = merged_config(config_path, sets, seed, seed_given).dump();
    char* run_dir = nullptr;
    ss_status st = ss_ablate(ctx, cfg.c_str(), manifest.c_str(), out_root.c_str(), &run_dir);
    return finish(ctx, st, run_dir, "ablate");
  }
  if (sw->parsed()) {
    std::string cfg = merged_config(config_path, sets, seed, seed_given).dump();
    char* run_dir = nullptr;
    ss_status st =
        ss_sweep(ctx, what.c_str(), cfg.c_str(), manifest.c_str(), out_root.c_str(), &run_dir);
    return finish(ctx, st, run_dir, "sweep");
  }
  if (vz->parsed()) {
    Json opts{{"split", split}, {"tap", tap},         {"count", count},
              {"sample", sample_id}, {"query", query}, {"perplexity", perplexity},
              {"seed", seed}};
    std::string ostr = opts.dump();
    char* run_dir = nullptr;
    ss_status st = ss_visualize(ctx, what.c_str(), ckpt.c_str(), manifest.c_str(), ostr.c_str(),
                                out_root.c_str(), &run_dir);
    return finish(ctx, st, run_dir, "visualize");
  }
  ss_context_destroy(ctx);
  return 2;
}
