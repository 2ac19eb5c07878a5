#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "samswin/engine.hpp"
#include "samswin/optim.hpp"

using namespace samswin;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("samswin_engine_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// Desk-miniature run configuration: trains in seconds on two cores.
RunConfig mini_run_config() {
  RunConfig rc;
  rc.model.backbone.image_size = 32;
  rc.model.backbone.embed_dim = 4;
  rc.model.backbone.depths = {1, 1, 1, 1};
  rc.model.backbone.heads = {1, 2, 2, 2};
  rc.model.backbone.window_size = 4;
  rc.model.backbone.mlp_ratio = 1.0;
  rc.stage1 = {2, 4, 1, 3e-4, 0.05, "cosine", "none"};
  rc.stage2 = {1, 4, 0, 3e-5, 1e-8, "cosine", "none"};
  rc.threads = 2;
  rc.seed = 17;
  return rc;
}

DatasetManifest mini_data(const std::string& dir, int per_class = 2) {
  DatasetManifest m = generate_synthetic(dir, per_class, 32, 5);
  return m;
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::vector<Json> out;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) out.push_back(Json::parse(line));
  return out;
}

Json find_event(const std::vector<Json>& recs, const std::string& event, bool last = false) {
  Json found;
  for (const auto& r : recs)
    if (r.value("event", "") == event) {
      found = r;
      if (!last) break;
    }
  REQUIRE(!found.is_null());
  return found;
}

}  // namespace

TEST_CASE("lr schedule: junction, endpoint, midpoint") {
  const double base = 3e-4;
  // warmup end hits base_lr exactly
  CHECK(lr_at(10, 110, 10, base) == base);
  // warmup is linear from 0
  CHECK(lr_at(0, 110, 10, base) == 0.0);
  CHECK(lr_at(5, 110, 10, base) == doctest::Approx(base * 0.5).epsilon(1e-12));
  // decay midpoint is exactly base/2
  CHECK(lr_at(10 + 50, 110, 10, base) == doctest::Approx(base / 2).epsilon(1e-9));
  // last step is nearly zero
  double tail = lr_at(109, 110, 10, base);
  CHECK(tail > 0.0);
  CHECK(tail <= base * (1.0 - std::cos(M_PI * 99.0 / 100.0)) / 2.0);
  // no warmup case starts at base_lr
  CHECK(lr_at(0, 100, 0, base) == base);
  CHECK_THROWS_AS(lr_at(110, 110, 10, base), Error);
}

TEST_CASE("adamw: zero learning rate leaves parameters unchanged") {
  ParamStore store;
  Tensor t = store.create("p", {4});
  Rng rng(1);
  init_trunc_normal(t, rng, 1.0);
  std::vector<double> before = t.value();
  std::vector<std::vector<double>> grads(1, std::vector<double>{1.0, -2.0, 3.0, 0.5});
  AdamW opt;
  opt.step(store, grads, 0.0, 0.1);
  CHECK(t.value() == before);
  // and a real step moves them
  opt.step(store, grads, 1e-2, 0.0);
  CHECK(t.value() != before);
}

TEST_CASE("gradient clipping rescales to the target norm") {
  std::vector<std::vector<double>> g{{3.0, 4.0}};  // norm 5
  clip_grad_norm(g, 10.0);
  CHECK(g[0][0] == 3.0);
  clip_grad_norm(g, 2.5);
  CHECK(g[0][0] == doctest::Approx(1.5));
  CHECK(g[0][1] == doctest::Approx(2.0));
}

TEST_CASE("ablation variants match the table definitions") {
  auto vs = AblationVariant::all();
  auto flags = [](const AblationVariant& v) {
    return std::array<bool, 4>{v.wib, v.lrb, v.ms_laem, v.cag};
  };
  CHECK(flags(vs[0]) == std::array<bool, 4>{true, false, false, false});
  CHECK(flags(vs[1]) == std::array<bool, 4>{false, true, false, false});
  CHECK(flags(vs[2]) == std::array<bool, 4>{true, true, false, false});
  CHECK(flags(vs[3]) == std::array<bool, 4>{true, true, true, false});
  CHECK(flags(vs[4]) == std::array<bool, 4>{true, true, true, true});
  CHECK_THROWS_AS(AblationVariant::from_name("M9"), Error);

  // M3 and M4 differ only by the ms_laem flag
  ModelConfig base;
  ModelConfig m3 = model_config_for_variant(base, vs[2], 1);
  ModelConfig m4 = model_config_for_variant(base, vs[3], 1);
  CHECK(m3.laem_count == 0);
  CHECK(m4.laem_count == base.laem_count);
  CHECK(m3.with_wib == m4.with_wib);
  CHECK(m3.with_lrb == m4.with_lrb);
}

TEST_CASE("training is deterministic: identical logs and reports for a seed") {
  auto data_dir = temp_dir("det_data");
  DatasetManifest data = mini_data(data_dir, 3);
  data = split_manifest(data, 0.34, 9);
  RunConfig rc = mini_run_config();
  TrainConfig tc = train_config_for_stage(rc, 1);
  tc.augmentations = "randaugment";  // determinism must hold with augmentation on

  auto v = AblationVariant::from_name("M5");
  auto out1 = temp_dir("det_run1");
  auto out2 = temp_dir("det_run2");
  TrainResult r1 = train(v, tc, rc.model, data, out1);
  TrainResult r2 = train(v, tc, rc.model, data, out2);
  CHECK(file_bytes(r1.log_path) == file_bytes(r2.log_path));

  EvalOptions eo;
  eo.threads = 2;
  eo.fallback_size = 32;
  MetricsReport m1 = evaluate_checkpoint(r1.last_checkpoint, data, Split::val, eo);
  MetricsReport m2 = evaluate_checkpoint(r2.last_checkpoint, data, Split::val, eo);
  CHECK(metrics_to_json(m1).dump() == metrics_to_json(m2).dump());

  // eval-mode purity: evaluating twice is identical
  MetricsReport m3 = evaluate_checkpoint(r1.last_checkpoint, data, Split::val, eo);
  CHECK(metrics_to_json(m1).dump() == metrics_to_json(m3).dump());
}

TEST_CASE("stage-two hand-off: loss continuity at step zero") {
  auto data_dir = temp_dir("cont_data");
  DatasetManifest data = mini_data(data_dir, 2);
  RunConfig rc = mini_run_config();
  auto v = AblationVariant::from_name("M5");

  auto d1 = temp_dir("cont_s1");
  TrainResult r1 = train(v, train_config_for_stage(rc, 1), rc.model, data, d1);
  auto recs1 = read_jsonl(r1.log_path);
  Json end1 = find_event(recs1, "end_eval");

  auto d2 = temp_dir("cont_s2");
  TrainResult r2 =
      train(v, train_config_for_stage(rc, 2), rc.model, data, d2, r1.last_checkpoint);
  auto recs2 = read_jsonl(r2.log_path);
  Json init2 = find_event(recs2, "init_eval");

  // same parameters, same data: classification losses agree to round-off
  double cls1 = end1["loss"]["cls"].get<double>();
  double cls2 = init2["loss"]["cls"].get<double>();
  CHECK(std::fabs(cls1 - cls2) <= 1e-12);
  // stage-two total = cls + freshly-enabled CAG terms
  double tot2 = init2["loss"]["total"].get<double>();
  double cw = init2["loss"]["cag_w"].get<double>();
  double cl = init2["loss"]["cag_l"].get<double>();
  CHECK(std::fabs(tot2 - (cls2 + cw + cl)) <= 1e-9);
  CHECK(cw > 0.0);
  CHECK(cl > 0.0);
}

TEST_CASE("training errors: stage gating, missing checkpoint, M4 with CAG") {
  auto data_dir = temp_dir("err_data");
  DatasetManifest data = mini_data(data_dir, 2);
  RunConfig rc = mini_run_config();
  auto out = temp_dir("err_out");

  TrainConfig bad1 = train_config_for_stage(rc, 1);
  bad1.cag_enabled = true;  // stage one must not carry CAG
  CHECK_THROWS_AS(train(AblationVariant::from_name("M5"), bad1, rc.model, data, out), Error);

  TrainConfig s2 = train_config_for_stage(rc, 2);
  CHECK_THROWS_AS(train(AblationVariant::from_name("M5"), s2, rc.model, data, out, ""), Error);
  CHECK_THROWS_AS(
      train(AblationVariant::from_name("M5"), s2, rc.model, data, out, "/nope/missing.ckpt"),
      Error);
  CHECK_THROWS_AS(train(AblationVariant::from_name("M4"), s2, rc.model, data, out, ""), Error);
}

TEST_CASE("M1 with CAG in stage two runs with the WIB term only") {
  auto data_dir = temp_dir("m1cag_data");
  DatasetManifest data = mini_data(data_dir, 2);
  RunConfig rc = mini_run_config();
  auto v = AblationVariant::from_name("M1");
  auto d1 = temp_dir("m1cag_s1");
  TrainResult r1 = train(v, train_config_for_stage(rc, 1), rc.model, data, d1);
  auto d2 = temp_dir("m1cag_s2");
  TrainResult r2 =
      train(v, train_config_for_stage(rc, 2), rc.model, data, d2, r1.last_checkpoint);
  auto recs = read_jsonl(r2.log_path);
  for (const auto& r : recs) {
    if (r.value("event", "") != "step") continue;
    CHECK(r["loss"]["cag_w"].get<double>() > 0.0);
    CHECK(r["loss"]["cag_l"].get<double>() == 0.0);  // L_l absent without the LRB
  }
}

TEST_CASE("evaluate: error paths") {
  auto data_dir = temp_dir("eval_data");
  DatasetManifest data = mini_data(data_dir, 2);
  RunConfig rc = mini_run_config();
  auto v = AblationVariant::from_name("M3");
  auto d1 = temp_dir("eval_run");
  TrainResult r = train(v, train_config_for_stage(rc, 1), rc.model, data, d1);

  EvalOptions eo;
  eo.fallback_size = 32;
  // a split with zero samples errors rather than returning NaN
  CHECK_THROWS_AS(evaluate_checkpoint(r.last_checkpoint, data, Split::test, eo), Error);

  // checkpoint/data image-size mismatch
  auto other_dir = temp_dir("eval_data64");
  DatasetManifest data64 = generate_synthetic(other_dir, 2, 64, 5);
  CHECK_THROWS_AS(evaluate_checkpoint(r.last_checkpoint, data64, Split::train, eo), Error);
}

TEST_CASE("checkpoints: round trip and lenient weight hook") {
  auto dir = temp_dir("ckpt");
  ModelConfig mc = mini_run_config().model;
  mc.init_seed = 4;
  SamSwinModel model(mc);
  CheckpointMeta meta{mc, "M5", 1, 4, ""};
  std::string path = (fs::path(dir) / "m.ckpt").string();
  save_checkpoint(path, model, meta);

  LoadedCheckpoint lc = load_checkpoint(path);
  CHECK(lc.meta.variant == "M5");
  REQUIRE(lc.model->params().count() == model.params().count());
  for (int i = 0; i < model.params().count(); ++i)
    CHECK(lc.model->params().tensors()[static_cast<size_t>(i)].value() ==
          model.params().tensors()[static_cast<size_t>(i)].value());

  // lenient hook: an M1 model picks up only its WIB/cls subset
  ModelConfig m1 = model_config_for_variant(mc, AblationVariant::from_name("M1"), 9);
  SamSwinModel small(m1);
  int loaded = load_matching_weights(small, path);
  CHECK(loaded > 0);
  CHECK(loaded < model.params().count());  // cls head widths differ, LRB absent

  CHECK_THROWS_AS(load_checkpoint((fs::path(dir) / "missing.ckpt").string()), Error);

  // wrong magic / truncated archives are rejected, not misparsed
  std::ofstream((fs::path(dir) / "junk.ckpt").string(), std::ios::binary) << "NOTACKPT0000";
  CHECK_THROWS_AS(load_checkpoint((fs::path(dir) / "junk.ckpt").string()), Error);
  {
    std::ifstream in(path, std::ios::binary);
    std::string head(256, '\0');
    in.read(head.data(), 256);
    std::ofstream((fs::path(dir) / "trunc.ckpt").string(), std::ios::binary)
        .write(head.data(), 256);
  }
  CHECK_THROWS_AS(load_checkpoint((fs::path(dir) / "trunc.ckpt").string()), Error);
}

TEST_CASE("eval purity holds with dropout configured") {
  auto data_dir = temp_dir("drop_data");
  DatasetManifest data = mini_data(data_dir, 2);
  RunConfig rc = mini_run_config();
  rc.model.backbone.drop_rate = 0.2;  // active during training only
  auto out = temp_dir("drop_out");
  TrainResult r = train(AblationVariant::from_name("M3"), train_config_for_stage(rc, 1),
                        rc.model, data, out);
  EvalOptions eo;
  eo.fallback_size = 32;
  MetricsReport a = evaluate_checkpoint(r.last_checkpoint, data, Split::train, eo);
  MetricsReport b = evaluate_checkpoint(r.last_checkpoint, data, Split::train, eo);
  CHECK(metrics_to_json(a).dump() == metrics_to_json(b).dump());
}

TEST_CASE("early stopping halts after the threshold epoch") {
  auto data_dir = temp_dir("early_data");
  DatasetManifest data = mini_data(data_dir, 2);
  RunConfig rc = mini_run_config();
  rc.early_stop_train_acc = 1e-9;  // stops at the first epoch with any correct sample
  rc.stage1.epochs = 30;
  TrainConfig tc = train_config_for_stage(rc, 1);
  auto out = temp_dir("early_out");
  TrainResult r = train(AblationVariant::from_name("M3"), tc, rc.model, data, out);
  CHECK(r.epochs_run < 30);
}
