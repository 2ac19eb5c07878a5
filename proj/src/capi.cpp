#include "samswin/samswin.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "samswin/config.hpp"
#include "samswin/engine.hpp"
#include "samswin/visualize.hpp"

namespace fs = std::filesystem;
using namespace samswin;

struct ss_context {
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ss_status classify_error(const std::string& msg) {
  if (msg.find("config:") != std::string::npos || msg.find("invalid") != std::string::npos ||
      msg.find("must be") != std::string::npos || msg.find("unknown") != std::string::npos)
    return SS_ERR_INVALID_ARGUMENT;
  if (msg.find("cannot open") != std::string::npos || msg.find("cannot write") != std::string::npos ||
      msg.find("missing") != std::string::npos || msg.find("truncated") != std::string::npos)
    return SS_ERR_IO;
  return SS_ERR_STATE;
}

template <typename Fn>
ss_status guarded(ss_context* ctx, Fn&& fn) {
  if (!ctx) return SS_ERR_INVALID_ARGUMENT;
  try {
    fn();
    ctx->last_error.clear();
    return SS_OK;
  } catch (const Error& e) {
    ctx->last_error = e.what();
    return classify_error(ctx->last_error);
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return SS_ERR_INTERNAL;
  }
}

Json parse_config_json(const char* config_json) {
  if (!config_json || !*config_json) return Json::object();
  try {
    return Json::parse(config_json);
  } catch (const std::exception& e) {
    throw Error(std::string("config: parse error: ") + e.what());
  }
}

std::string require(const char* v, const char* what) {
  if (!v || !*v) throw Error(std::string("missing required argument: ") + what);
  return v;
}

// Run-directory setup shared by every command: content-addressed directory,
// effective-config echo, and the run manifest skeleton.
struct RunScope {
  std::string dir;
  RunManifest manifest;

  RunScope(const std::string& root, const std::string& command, const Json& effective,
           uint64_t seed) {
    std::string digest = config_digest(effective);
    dir = make_run_dir(root, command, digest, seed);
    std::ofstream cfg(fs::path(dir) / "effective_config.json");
    check(cfg.good(), "cannot write effective config in " + dir);
    cfg << effective.dump(2) << "\n";
    manifest.command = command;
    manifest.config_hash = digest;
    manifest.seed = seed;
    manifest.code_version = kVersion;
    manifest.started = timestamp_utc_now();
    manifest.outputs.push_back("effective_config.json");
  }

  void finish(std::initializer_list<std::string> outputs) {
    for (const auto& o : outputs) manifest.outputs.push_back(o);
    manifest.finished = timestamp_utc_now();
    write_run_manifest(manifest, dir);
  }
};

}  // namespace

extern "C" {

const char* ss_version(void) { return kVersion; }

ss_status ss_context_create(ss_context** out_ctx) {
  if (!out_ctx) return SS_ERR_INVALID_ARGUMENT;
  *out_ctx = new (std::nothrow) ss_context();
  return *out_ctx ? SS_OK : SS_ERR_INTERNAL;
}

void ss_context_destroy(ss_context* ctx) { delete ctx; }

const char* ss_last_error(const ss_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

void ss_string_free(char* s) { std::free(s); }

ss_status ss_generate_data(ss_context* ctx, const char* out_dir, int per_class, int image_size,
                           uint64_t seed, double val_fraction, char** out_manifest_path) {
  return guarded(ctx, [&] {
    std::string dir = require(out_dir, "out_dir");
    DatasetManifest m = generate_synthetic(dir, per_class, image_size, seed);
    if (val_fraction > 0.0) {
      m = split_manifest(m, val_fraction, seed);
      save_manifest(m, (fs::path(dir) / "manifest.tsv").string());
    }
    if (out_manifest_path)
      *out_manifest_path = dup_string((fs::path(dir) / "manifest.tsv").string());
  });
}

ss_status ss_segment_report(ss_context* ctx, const char* manifest_path, const char* split,
                            const char* segmenter, const char* mask_dir, int report_iou,
                            const char* out_root, char** out_run_dir) {
  return guarded(ctx, [&] {
    DatasetManifest data = load_manifest(require(manifest_path, "manifest"));
    std::string seg_name = require(segmenter, "segmenter");
    SegmenterKind seg = segmenter_from_string(seg_name, mask_dir ? mask_dir : "");
    Split sp = split_from_string(split && *split ? split : "train");
    Json effective{{"command", "segment"},
                   {"manifest", manifest_path},
                   {"split", split_name(sp)},
                   {"segmenter", seg_name},
                   {"mask_dir", mask_dir ? mask_dir : ""},
                   {"report_iou", report_iou != 0}};
    RunScope run(require(out_root, "out"), "segment", effective, 0);
    run_segment_report(data, sp, seg, report_iou != 0, std::min(128, data.image_size), run.dir);
    run.finish({"localizations.jsonl", "segment_summary.json"});
    if (out_run_dir) *out_run_dir = dup_string(run.dir);
  });
}

ss_status ss_train(ss_context* ctx, const char* config_json, const char* manifest_path,
                   const char* variant, int stage, const char* init_checkpoint,
                   const char* out_root, char** out_run_dir) {
  return guarded(ctx, [&] {
    RunConfig rc = run_config_from_json(parse_config_json(config_json));
    DatasetManifest data = load_manifest(require(manifest_path, "manifest"));
    AblationVariant v = AblationVariant::from_name(require(variant, "variant"));
    TrainConfig tc = train_config_for_stage(rc, stage);
    Json effective = run_config_to_json(rc);
    effective["command"] = "train";
    effective["variant"] = v.name;
    effective["stage"] = stage;
    effective["manifest"] = manifest_path;
    RunScope run(require(out_root, "out"), "train", effective, rc.seed);
    TrainResult r = train(v, tc, rc.model, data, run.dir,
                          init_checkpoint ? std::string(init_checkpoint) : std::string());
    run.finish({"train_log.jsonl", "best.ckpt", "last.ckpt"});
    (void)r;
    if (out_run_dir) *out_run_dir = dup_string(run.dir);
  });
}

ss_status ss_evaluate(ss_context* ctx, const char* checkpoint_path, const char* manifest_path,
                      const char* split, const char* out_root, char** out_run_dir) {
  return guarded(ctx, [&] {
    std::string ckpt = require(checkpoint_path, "ckpt");
    DatasetManifest data = load_manifest(require(manifest_path, "manifest"));
    Split sp = split_from_string(require(split, "split"));
    Json effective{{"command", "eval"},
                   {"ckpt", ckpt},
                   {"manifest", manifest_path},
                   {"split", split_name(sp)}};
    RunScope run(require(out_root, "out"), "eval", effective, 0);
    EvalOptions opt;
    opt.fallback_size = std::min(128, data.image_size);
    MetricsReport m = evaluate_checkpoint(ckpt, data, sp, opt);
    write_metrics_report(m, run.dir, "metrics");
    run.finish({"metrics.json", "metrics.txt", "metrics_confusion.ppm"});
    if (out_run_dir) *out_run_dir = dup_string(run.dir);
  });
}

ss_status ss_ablate(ss_context* ctx, const char* config_json, const char* manifest_path,
                    const char* out_root, char** out_run_dir) {
  return guarded(ctx, [&] {
    RunConfig rc = run_config_from_json(parse_config_json(config_json));
    DatasetManifest data = load_manifest(require(manifest_path, "manifest"));
    Json effective = run_config_to_json(rc);
    effective["command"] = "ablate";
    effective["manifest"] = manifest_path;
    RunScope run(require(out_root, "out"), "ablate", effective, rc.seed);
    auto rows = run_ablation(data, rc, run.dir);
    write_table(rows, "variant", (fs::path(run.dir) / "ablation").string());
    run.finish({"ablation.tsv", "ablation.txt", "ablation.jsonl"});
    if (out_run_dir) *out_run_dir = dup_string(run.dir);
  });
}

ss_status ss_sweep(ss_context* ctx, const char* what, const char* config_json,
                   const char* manifest_path, const char* out_root, char** out_run_dir) {
  return guarded(ctx, [&] {
    std::string kind = require(what, "what");
    RunConfig rc = run_config_from_json(parse_config_json(config_json));
    DatasetManifest data = load_manifest(require(manifest_path, "manifest"));
    Json effective = run_config_to_json(rc);
    effective["command"] = "sweep";
    effective["what"] = kind;
    effective["manifest"] = manifest_path;
    RunScope run(require(out_root, "out"), "sweep-" + kind, effective, rc.seed);
    std::vector<TableRow> rows;
    std::string col;
    if (kind == "laem") {
      rows = sweep_laem(data, rc, {0, 1, 2, 3, 4}, run.dir);
      col = "laem_count";
    } else if (kind == "alpha") {
      rows = sweep_alpha(data, rc, {1e-1, 1e-2, 1e-3, 1e-4}, run.dir);
      col = "alpha";
    } else {
      throw Error("sweep: field \"what\" must be laem|alpha, got " + kind);
    }
    write_table(rows, col, (fs::path(run.dir) / "sweep").string());
    run.finish({"sweep.tsv", "sweep.txt", "sweep.jsonl"});
    if (out_run_dir) *out_run_dir = dup_string(run.dir);
  });
}

ss_status ss_visualize(ss_context* ctx, const char* what, const char* checkpoint_path,
                       const char* manifest_path, const char* options_json, const char* out_root,
                       char** out_run_dir) {
  return guarded(ctx, [&] {
    std::string kind = require(what, "what");
    Json opts = parse_config_json(options_json);
    DatasetManifest data = load_manifest(require(manifest_path, "manifest"));
    LoadedCheckpoint lc = load_checkpoint(require(checkpoint_path, "ckpt"));
    Split sp = split_from_string(opts.value("split", "train"));
    SegmenterKind seg = segmenter_from_string(opts.value("segmenter", "oracle"),
                                              opts.value("mask_dir", ""));
    const int fb = std::min(128, data.image_size);
    Json effective{{"command", "visualize"}, {"what", kind},      {"ckpt", checkpoint_path},
                   {"manifest", manifest_path}, {"options", opts}};
    RunScope run(require(out_root, "out"), "visualize-" + kind, effective,
                 opts.value("seed", static_cast<uint64_t>(0)));
    if (kind == "gradcam") {
      GradCamTap tap = gradcam_tap_from_string(opts.value("tap", "wib"));
      run_gradcam(*lc.model, data, sp, tap, opts.value("count", 16), seg, fb, run.dir);
      run.finish({"gradcam.jsonl"});
    } else if (kind == "tsne") {
      TsneOptions to;
      to.perplexity = opts.value("perplexity", 10.0);
      to.iters = opts.value("iters", 600);
      to.seed = opts.value("seed", static_cast<uint64_t>(0));
      run_tsne(*lc.model, data, sp, to, seg, fb, run.dir);
      run.finish({"tsne.ppm", "tsne_coords.tsv", "tsne_summary.json"});
    } else if (kind == "attention") {
      run_attention_dump(*lc.model, data, sp, opts.value("sample", ""), opts.value("query", -1),
                         seg, fb, run.dir);
      run.finish({});
    } else {
      throw Error("visualize: field \"what\" must be gradcam|tsne|attention, got " + kind);
    }
    if (out_run_dir) *out_run_dir = dup_string(run.dir);
  });
}

}  // extern "C"
