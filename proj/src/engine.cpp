#include "samswin/engine.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "samswin/objective.hpp"
#include "samswin/optim.hpp"

namespace fs = std::filesystem;

namespace samswin {

void TrainConfig::validate() const {
  check(stage == 1 || stage == 2, "train: stage must be 1 or 2");
  if (stage == 1) check(!cag_enabled, "train: stage one runs without the CAG loss");
  if (stage == 2) check(cag_enabled, "train: stage two runs with the CAG loss");
  check(epochs >= 1, "train: epochs must be >= 1");
  check(batch_size >= 1, "train: batch_size must be >= 1");
  check(warmup_epochs >= 0 && warmup_epochs < epochs, "train: warmup_epochs < epochs required");
  check(base_lr > 0.0, "train: base_lr must be positive");
  check(weight_decay >= 0.0, "train: weight_decay must be >= 0");
  check(schedule == "cosine", "train: only the cosine schedule is supported");
  check(augmentations == "none" || augmentations == "randaugment",
        "train: augmentations must be none|randaugment");
  check(alpha > 0.0, "train: alpha must be positive");
  check(threads >= 1, "train: threads must be >= 1");
}

TrainConfig train_config_for_stage(const RunConfig& rc, int stage) {
  check(stage == 1 || stage == 2, "train: stage must be 1 or 2");
  const StageConfig& s = stage == 1 ? rc.stage1 : rc.stage2;
  TrainConfig c;
  c.stage = stage;
  c.epochs = s.epochs;
  c.batch_size = s.batch_size;
  c.warmup_epochs = s.warmup_epochs;
  c.base_lr = s.base_lr;
  c.weight_decay = s.weight_decay;
  c.schedule = s.schedule;
  c.augmentations = s.augmentations;
  c.cag_enabled = (stage == 2);
  c.seed = rc.seed;
  c.alpha = rc.alpha;
  c.threads = rc.threads;
  c.grad_clip_norm = rc.grad_clip_norm;
  c.early_stop_train_acc = rc.early_stop_train_acc;
  c.segmenter = rc.segmenter;
  c.mask_dir = rc.mask_dir;
  c.fallback_size = rc.effective_fallback();
  c.init_weights = rc.init_weights;
  return c;
}

AblationVariant AblationVariant::from_name(const std::string& name) {
  for (const auto& v : all())
    if (v.name == name) return v;
  throw Error("unknown ablation variant: " + name + " (expected M1..M5)");
}

std::array<AblationVariant, 5> AblationVariant::all() {
  return {AblationVariant{"M1", true, false, false, false},
          AblationVariant{"M2", false, true, false, false},
          AblationVariant{"M3", true, true, false, false},
          AblationVariant{"M4", true, true, true, false},
          AblationVariant{"M5", true, true, true, true}};
}

ModelConfig model_config_for_variant(const ModelConfig& base, const AblationVariant& v,
                                     uint64_t seed) {
  ModelConfig mc = base;
  mc.with_wib = v.wib;
  mc.with_lrb = v.lrb;
  mc.laem_count = v.ms_laem ? base.laem_count : 0;
  mc.init_seed = seed;
  return mc;
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

namespace {

void parallel_chunks(int n_items, int n_threads,
                     const std::function<void(int thread, int begin, int end)>& fn) {
  n_threads = std::max(1, std::min(n_threads, n_items));
  if (n_threads <= 1) {
    fn(0, 0, n_items);
    return;
  }
  std::vector<std::thread> pool;
  const int base = n_items / n_threads, rem = n_items % n_threads;
  int begin = 0;
  for (int t = 0; t < n_threads; ++t) {
    int len = base + (t < rem ? 1 : 0);
    int b = begin, e = begin + len;
    begin = e;
    pool.emplace_back([&fn, t, b, e] { fn(t, b, e); });
  }
  for (auto& th : pool) th.join();
}

struct Prepared {
  ImageSample sample;
  Image lesion;  // empty when the model has no LRB
  bool fallback = false;
};

Prepared prepare_sample(ImageSample s, bool need_lesion, const SegmenterKind& seg, int fallback) {
  Prepared p;
  p.sample = std::move(s);
  if (need_lesion) {
    LesionLocalization loc = localize(p.sample, seg, fallback);
    p.lesion = std::move(loc.lesion_image);
    p.fallback = loc.used_fallback;
  }
  return p;
}

// Json with stable numeric formatting (shortest round-trip via nlohmann).
void append_jsonl(std::ofstream& f, const Json& j) { f << j.dump() << "\n"; }

struct BatchStats {
  LossBreakdown sum;  // per-sample sums, converted to means by caller
  int correct = 0;
};

// Forward/backward over samples [begin,end) accumulating into thread-local
// gradient buffers. Deterministic: fixed chunk assignment, fixed order.
void run_batch_threaded(const SamSwinModel& model, const std::vector<const Prepared*>& batch,
                        const LossWeights& weights, int threads, uint64_t step_seed,
                        std::vector<std::vector<std::vector<double>>>& thread_grads,
                        std::vector<BatchStats>& thread_stats) {
  const int n = static_cast<int>(batch.size());
  const int param_count = model.params().count();
  const int t_used = std::max(1, std::min(threads, n));
  thread_grads.assign(static_cast<size_t>(t_used),
                      std::vector<std::vector<double>>(static_cast<size_t>(param_count)));
  thread_stats.assign(static_cast<size_t>(t_used), BatchStats{});
  parallel_chunks(n, t_used, [&](int t, int begin, int end) {
    GradSink sink{&thread_grads[static_cast<size_t>(t)]};
    for (int i = begin; i < end; ++i) {
      const Prepared& p = *batch[static_cast<size_t>(i)];
      RuntimeOpts opts;
      opts.train = true;
      opts.dropout_seed = mix_seed(step_seed, static_cast<uint64_t>(i), 0xd50u);
      auto out = model.forward(p.sample.pixels, p.lesion, opts);
      TotalLoss loss =
          total_loss(out.cls_logits, out.wib ? &*out.wib : nullptr,
                     out.lrb ? &*out.lrb : nullptr, static_cast<int>(p.sample.label), weights);
      backward(loss.total, sink);
      BatchStats& st = thread_stats[static_cast<size_t>(t)];
      st.sum += loss.values;
      const auto& lv = out.cls_logits.value();
      int pred = static_cast<int>(std::max_element(lv.begin(), lv.end()) - lv.begin());
      if (pred == static_cast<int>(p.sample.label)) ++st.correct;
    }
  });
}

LossBreakdown mean_eval_loss(const SamSwinModel& model, const std::vector<Prepared>& samples,
                             const LossWeights& weights, int threads) {
  const int n = static_cast<int>(samples.size());
  std::vector<LossBreakdown> per(static_cast<size_t>(n));
  parallel_chunks(n, threads, [&](int, int begin, int end) {
    NoGradGuard ng;
    for (int i = begin; i < end; ++i) {
      const Prepared& p = samples[static_cast<size_t>(i)];
      auto out = model.forward(p.sample.pixels, p.lesion, RuntimeOpts{});
      per[static_cast<size_t>(i)] =
          total_loss(out.cls_logits, out.wib ? &*out.wib : nullptr,
                     out.lrb ? &*out.lrb : nullptr, static_cast<int>(p.sample.label), weights)
              .values;
    }
  });
  LossBreakdown mean;
  for (const auto& b : per) mean += b;
  if (n > 0) mean *= 1.0 / n;
  return mean;
}

Confusion eval_confusion(const SamSwinModel& model, const std::vector<Prepared>& samples,
                         int threads) {
  const int n = static_cast<int>(samples.size());
  std::vector<int> preds(static_cast<size_t>(n), -1);
  parallel_chunks(n, threads, [&](int, int begin, int end) {
    NoGradGuard ng;
    for (int i = begin; i < end; ++i) {
      const Prepared& p = samples[static_cast<size_t>(i)];
      auto out = model.forward(p.sample.pixels, p.lesion, RuntimeOpts{});
      const auto& lv = out.cls_logits.value();
      preds[static_cast<size_t>(i)] =
          static_cast<int>(std::max_element(lv.begin(), lv.end()) - lv.begin());
    }
  });
  Confusion conf{};
  for (int i = 0; i < n; ++i)
    ++conf[static_cast<size_t>(samples[static_cast<size_t>(i)].sample.label)]
          [static_cast<size_t>(preds[static_cast<size_t>(i)])];
  return conf;
}

Json breakdown_to_json(const LossBreakdown& b) {
  return Json{{"total", b.total},           {"cls", b.cls},
              {"cag_w", b.cag_w},           {"cag_l", b.cag_l},
              {"per_stage_w", b.per_stage_w}, {"per_stage_l", b.per_stage_l}};
}

std::vector<Prepared> prepare_split(const DatasetManifest& data, Split split, bool need_lesion,
                                    const SegmenterKind& seg, int fallback) {
  std::vector<Prepared> out;
  for (int idx : data.split_indices(split))
    out.push_back(prepare_sample(load_sample(data, idx), need_lesion, seg, fallback));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

TrainResult train(const AblationVariant& variant, const TrainConfig& cfg,
                  const ModelConfig& model_base, const DatasetManifest& data,
                  const std::string& out_dir, const std::string& init_checkpoint) {
  cfg.validate();
  if (variant.name == "M4" && cfg.cag_enabled)
    throw Error("train: variant M4 with CAG enabled is inconsistent (it would duplicate M5)");
  check(data.image_size == model_base.backbone.image_size,
        "train: manifest image size " + std::to_string(data.image_size) +
            " does not match model image size " +
            std::to_string(model_base.backbone.image_size));

  fs::create_directories(out_dir);
  const SegmenterKind seg = segmenter_from_string(cfg.segmenter, cfg.mask_dir);
  const int fallback = std::min(cfg.fallback_size, model_base.backbone.image_size);

  // Model: fresh for stage 1, loaded from the stage-1 checkpoint for stage 2.
  ModelConfig mc = model_config_for_variant(model_base, variant, cfg.seed);
  std::unique_ptr<SamSwinModel> model;
  if (cfg.stage == 2) {
    check(!init_checkpoint.empty() && fs::exists(init_checkpoint),
          "train: stage two requires an existing stage-one checkpoint");
    LoadedCheckpoint lc = load_checkpoint(init_checkpoint);
    Json a = model_config_to_json(lc.meta.model);
    Json b = model_config_to_json(mc);
    a.erase("init_seed");
    b.erase("init_seed");
    check(a == b, "train: stage-one checkpoint architecture does not match this run");
    model = std::move(lc.model);
  } else {
    model = std::make_unique<SamSwinModel>(mc);
    if (!cfg.init_weights.empty()) {
      int loaded = load_matching_weights(*model, cfg.init_weights);
      check(loaded > 0, "train: init_weights matched no parameters: " + cfg.init_weights);
    }
  }

  const bool need_lesion = mc.with_lrb;
  const bool augment = cfg.augmentations == "randaugment";
  const LossWeights weights{cfg.alpha, cfg.cag_enabled};

  // Base samples cached undecorated; augmentation re-applies per epoch.
  std::vector<int> train_entries = data.split_indices(Split::train);
  check(!train_entries.empty(), "train: empty train split");
  std::vector<ImageSample> base_samples;
  for (int idx : train_entries) base_samples.push_back(load_sample(data, idx));
  std::vector<Prepared> train_prepared;
  for (const auto& s : base_samples)
    train_prepared.push_back(prepare_sample(s, need_lesion, seg, fallback));
  std::vector<Prepared> val_prepared =
      prepare_split(data, Split::val, need_lesion, seg, fallback);

  const int n_train = static_cast<int>(train_prepared.size());
  const int64_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = steps_per_epoch * cfg.epochs;
  const int64_t warmup_steps = steps_per_epoch * cfg.warmup_epochs;

  TrainResult res;
  res.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
  res.best_checkpoint = (fs::path(out_dir) / "best.ckpt").string();
  res.last_checkpoint = (fs::path(out_dir) / "last.ckpt").string();
  std::ofstream log(res.log_path);
  check(log.good(), "train: cannot write log at " + res.log_path);

  append_jsonl(log, Json{{"event", "start"},
                         {"variant", variant.name},
                         {"stage", cfg.stage},
                         {"seed", cfg.seed},
                         {"cag_enabled", cfg.cag_enabled},
                         {"params", model->params().total_numel()},
                         {"train_samples", n_train},
                         {"val_samples", static_cast<int>(val_prepared.size())},
                         {"steps_per_epoch", steps_per_epoch}});
  append_jsonl(log, Json{{"event", "init_eval"},
                         {"split", "train"},
                         {"loss", breakdown_to_json(
                                      mean_eval_loss(*model, train_prepared, weights, cfg.threads))}});

  AdamW opt;
  CheckpointMeta meta{mc, variant.name, cfg.stage, cfg.seed, kVersion};
  int64_t global_step = 0;
  bool best_saved = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fixed data order permutation per epoch, derived from the seed.
    std::vector<int> order(static_cast<size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;
    Rng perm_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch), 0x9e23u));
    perm_rng.shuffle(order);

    // Refresh augmented pixels (and lesion crops) for this epoch.
    const std::vector<Prepared>* epoch_samples = &train_prepared;
    std::vector<Prepared> augmented;
    if (augment) {
      augmented.reserve(base_samples.size());
      for (size_t i = 0; i < base_samples.size(); ++i) {
        ImageSample s = base_samples[i];
        apply_augmentation(s, cfg.seed, static_cast<uint64_t>(epoch),
                           train_entries[i]);
        augmented.push_back(prepare_sample(std::move(s), need_lesion, seg, fallback));
      }
      epoch_samples = &augmented;
    }

    int epoch_correct = 0;
    LossBreakdown epoch_sum;
    for (int64_t bstart = 0; bstart < n_train; bstart += cfg.batch_size) {
      const int bn = static_cast<int>(std::min<int64_t>(cfg.batch_size, n_train - bstart));
      std::vector<const Prepared*> batch(static_cast<size_t>(bn));
      for (int i = 0; i < bn; ++i)
        batch[static_cast<size_t>(i)] =
            &(*epoch_samples)[static_cast<size_t>(order[static_cast<size_t>(bstart + i)])];

      const double lr = lr_at(global_step, total_steps, warmup_steps, cfg.base_lr);
      std::vector<std::vector<std::vector<double>>> tg;
      std::vector<BatchStats> ts;
      run_batch_threaded(*model, batch, weights, cfg.threads,
                         mix_seed(cfg.seed, static_cast<uint64_t>(global_step), 0x57e9u), tg, ts);

      // Deterministic reduction: thread buffers summed in thread order.
      std::vector<std::vector<double>> grads(static_cast<size_t>(model->params().count()));
      LossBreakdown batch_sum;
      int batch_correct = 0;
      for (size_t t = 0; t < tg.size(); ++t) {
        for (size_t pi = 0; pi < grads.size(); ++pi) {
          auto& src = tg[t][pi];
          if (src.empty()) continue;
          if (grads[pi].empty()) {
            grads[pi] = std::move(src);
          } else {
            for (size_t k = 0; k < src.size(); ++k) grads[pi][k] += src[k];
          }
        }
        batch_sum += ts[t].sum;
        batch_correct += ts[t].correct;
      }
      for (auto& g : grads)
        for (double& x : g) x /= bn;  // batch reduction = mean over samples
      clip_grad_norm(grads, cfg.grad_clip_norm);
      opt.step(model->params(), grads, lr, cfg.weight_decay);

      LossBreakdown batch_mean = batch_sum;
      batch_mean *= 1.0 / bn;
      append_jsonl(log, Json{{"event", "step"},
                             {"step", global_step},
                             {"epoch", epoch},
                             {"lr", lr},
                             {"n", bn},
                             {"loss", breakdown_to_json(batch_mean)}});
      epoch_sum += batch_sum;
      epoch_correct += batch_correct;
      ++global_step;
    }

    const double train_acc = static_cast<double>(epoch_correct) / n_train;
    LossBreakdown epoch_mean = epoch_sum;
    epoch_mean *= 1.0 / n_train;
    Json epoch_rec{{"event", "epoch"},
                   {"epoch", epoch},
                   {"train_acc", train_acc},
                   {"loss", breakdown_to_json(epoch_mean)}};
    if (!val_prepared.empty()) {
      MetricsReport vm = compute_metrics(eval_confusion(*model, val_prepared, cfg.threads));
      epoch_rec["val_accuracy"] = vm.accuracy;
      epoch_rec["val_macro_f1"] = vm.macro_f1;
      if (vm.macro_f1 > res.best_val_macro_f1 || res.best_epoch < 0) {
        res.best_val_macro_f1 = vm.macro_f1;
        res.best_epoch = epoch;
        save_checkpoint(res.best_checkpoint, *model, meta);
        best_saved = true;
      }
    }
    append_jsonl(log, epoch_rec);
    res.final_train_acc = train_acc;
    res.epochs_run = epoch + 1;
    if (cfg.early_stop_train_acc > 0.0 && train_acc >= cfg.early_stop_train_acc) break;
  }

  save_checkpoint(res.last_checkpoint, *model, meta);
  if (!best_saved) {
    // No validation data: the last checkpoint doubles as best.
    save_checkpoint(res.best_checkpoint, *model, meta);
    res.best_epoch = res.epochs_run - 1;
  }
  append_jsonl(log, Json{{"event", "end_eval"},
                         {"split", "train"},
                         {"loss", breakdown_to_json(
                                      mean_eval_loss(*model, train_prepared, weights, cfg.threads))}});
  append_jsonl(log, Json{{"event", "end"},
                         {"epochs_run", res.epochs_run},
                         {"final_train_acc", res.final_train_acc},
                         {"best_epoch", res.best_epoch},
                         {"best_val_macro_f1", res.best_val_macro_f1}});
  return res;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

MetricsReport evaluate(const SamSwinModel& model, const DatasetManifest& data, Split split,
                       const EvalOptions& opt) {
  check(data.image_size == model.config().backbone.image_size,
        "evaluate: checkpoint image size does not match the dataset");
  const SegmenterKind seg = segmenter_from_string(opt.segmenter, opt.mask_dir);
  const int fallback = std::min(opt.fallback_size, model.config().backbone.image_size);
  std::vector<Prepared> samples =
      prepare_split(data, split, model.config().with_lrb, seg, fallback);
  check(!samples.empty(),
        std::string("evaluate: split '") + split_name(split) + "' has no samples");
  return compute_metrics(eval_confusion(model, samples, opt.threads));
}

MetricsReport evaluate_checkpoint(const std::string& checkpoint_path, const DatasetManifest& data,
                                  Split split, const EvalOptions& opt) {
  LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
  return evaluate(*lc.model, data, split, opt);
}

// ---------------------------------------------------------------------------
// protocol runners
// ---------------------------------------------------------------------------

namespace {

Split pick_eval_split(const DatasetManifest& data, const std::string& preferred) {
  Split want = split_from_string(preferred);
  if (!data.split_indices(want).empty()) return want;
  if (!data.split_indices(Split::val).empty()) return Split::val;
  return Split::train;
}

// Full per-variant protocol: stage 1 always; stage 2 only when the variant
// carries the CAG loss. Returns the checkpoint to evaluate.
std::string run_protocol(const AblationVariant& v, const RunConfig& rc,
                         const DatasetManifest& data, const std::string& out_dir) {
  TrainConfig c1 = train_config_for_stage(rc, 1);
  TrainResult r1 = train(v, c1, rc.model, data, (fs::path(out_dir) / "stage1").string());
  std::string eval_ckpt = r1.best_checkpoint;
  if (v.cag) {
    TrainConfig c2 = train_config_for_stage(rc, 2);
    TrainResult r2 = train(v, c2, rc.model, data, (fs::path(out_dir) / "stage2").string(),
                           r1.last_checkpoint);
    eval_ckpt = r2.best_checkpoint;
  }
  return eval_ckpt;
}

EvalOptions eval_options_from(const RunConfig& rc) {
  EvalOptions o;
  o.threads = rc.threads;
  o.segmenter = rc.segmenter;
  o.mask_dir = rc.mask_dir;
  o.fallback_size = rc.effective_fallback();
  return o;
}

}  // namespace

std::vector<TableRow> run_ablation(const DatasetManifest& data, const RunConfig& rc,
                                   const std::string& out_dir) {
  std::vector<TableRow> rows;
  Split esplit = pick_eval_split(data, rc.eval_split);
  for (const auto& v : AblationVariant::all()) {
    std::string vdir = (fs::path(out_dir) / v.name).string();
    std::string ckpt = run_protocol(v, rc, data, vdir);
    MetricsReport m = evaluate_checkpoint(ckpt, data, esplit, eval_options_from(rc));
    rows.push_back({v.name, 0.0, m});
  }
  return rows;
}

std::vector<TableRow> sweep_laem(const DatasetManifest& data, const RunConfig& rc,
                                 const std::vector<int>& n_values, const std::string& out_dir) {
  std::vector<TableRow> rows;
  Split esplit = pick_eval_split(data, rc.eval_split);
  AblationVariant m5 = AblationVariant::from_name("M5");
  for (int n : n_values) {
    check(n >= 0 && n <= 4, "sweep: laem count must be in 0..4");
    RunConfig rcn = rc;
    rcn.model.laem_count = n;
    std::string dir = (fs::path(out_dir) / ("laem" + std::to_string(n))).string();
    std::string ckpt = run_protocol(m5, rcn, data, dir);
    MetricsReport m = evaluate_checkpoint(ckpt, data, esplit, eval_options_from(rcn));
    rows.push_back({"n=" + std::to_string(n), static_cast<double>(n), m});
  }
  return rows;
}

std::vector<TableRow> sweep_alpha(const DatasetManifest& data, const RunConfig& rc,
                                  const std::vector<double>& alphas, const std::string& out_dir) {
  std::vector<TableRow> rows;
  Split esplit = pick_eval_split(data, rc.eval_split);
  AblationVariant m5 = AblationVariant::from_name("M5");
  int k = 0;
  for (double a : alphas) {
    check(a > 0.0, "sweep: alpha must be positive");
    RunConfig rca = rc;
    rca.alpha = a;
    char label[32];
    std::snprintf(label, sizeof(label), "%.0e", a);
    std::string dir = (fs::path(out_dir) / ("alpha" + std::to_string(k++))).string();
    std::string ckpt = run_protocol(m5, rca, data, dir);
    MetricsReport m = evaluate_checkpoint(ckpt, data, esplit, eval_options_from(rca));
    rows.push_back({label, a, m});
  }
  return rows;
}

void write_table(const std::vector<TableRow>& rows, const std::string& setting_col,
                 const std::string& stem) {
  {
    std::ofstream tsv(stem + ".tsv");
    check(tsv.good(), "cannot write table: " + stem + ".tsv");
    tsv << setting_col
        << "\taccuracy\tprecision\trecall\tf1\trecall_normal\trecall_benign\trecall_malignant\n";
    char line[256];
    for (const auto& r : rows) {
      std::snprintf(line, sizeof(line), "%s\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n",
                    r.setting.c_str(), r.metrics.accuracy, r.metrics.macro_precision,
                    r.metrics.macro_recall, r.metrics.macro_f1, r.metrics.per_class_recall[0],
                    r.metrics.per_class_recall[1], r.metrics.per_class_recall[2]);
      tsv << line;
    }
  }
  {
    std::ofstream txt(stem + ".txt");
    char line[256];
    std::snprintf(line, sizeof(line), "%-12s %8s %9s %8s %8s %8s %8s %10s\n", setting_col.c_str(),
                  "accuracy", "precision", "recall", "f1", "normal", "benign", "malignant");
    txt << line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof(line), "%-12s %8.4f %9.4f %8.4f %8.4f %8.4f %8.4f %10.4f\n",
                    r.setting.c_str(), r.metrics.accuracy, r.metrics.macro_precision,
                    r.metrics.macro_recall, r.metrics.macro_f1, r.metrics.per_class_recall[0],
                    r.metrics.per_class_recall[1], r.metrics.per_class_recall[2]);
      txt << line;
    }
  }
  {
    std::ofstream jl(stem + ".jsonl");
    for (const auto& r : rows) {
      Json j{{setting_col, r.setting},
             {"setting_value", r.setting_value},
             {"metrics", metrics_to_json(r.metrics)}};
      jl << j.dump() << "\n";
    }
  }
}

}  // namespace samswin
