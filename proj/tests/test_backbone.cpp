#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "samswin/backbone.hpp"
#include "samswin/rng.hpp"

using namespace samswin;

namespace {

BackboneConfig tiny_config(int image = 32, int c = 4, BlockFamily fam = BlockFamily::swinv2) {
  BackboneConfig cfg;
  cfg.image_size = image;
  cfg.embed_dim = c;
  cfg.depths = {1, 1, 1, 1};
  cfg.heads = {1, 2, 2, 2};
  cfg.window_size = 4;
  cfg.mlp_ratio = 2.0;
  cfg.family = fam;
  return cfg;
}

Image random_image(int size, uint64_t seed) {
  Image img(size, size);
  Rng rng(seed);
  for (auto& p : img.px) p = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("patch embed: grid bookkeeping at full scale") {
  // 256x256 input, P=4, C=128 -> 64x64 grid of 128-channel tokens
  ParamStore store;
  Rng rng(1);
  BackboneConfig cfg;
  cfg.image_size = 256;
  cfg.embed_dim = 128;
  BranchParams bp;
  bp.patch_proj.w = store.create("pe.w", {128, 48});
  init_trunc_normal(bp.patch_proj.w, rng);
  bp.patch_proj.b = store.create("pe.b", {128});
  bp.patch_norm.gamma = store.create("pe.g", {128});
  init_const(bp.patch_norm.gamma, 1.0);
  bp.patch_norm.beta = store.create("pe.beta", {128});
  TokenGrid g = patch_embed(random_image(256, 2), cfg, bp);
  CHECK(g.grid_h == 64);
  CHECK(g.grid_w == 64);
  CHECK(g.channels == 128);
  CHECK(g.tokens.shape() == Shape{64 * 64, 128});
}

TEST_CASE("patch embed: zero image with zero bias gives zero tokens") {
  ParamStore store;
  Rng rng(3);
  BackboneConfig cfg = tiny_config();
  BranchParams bp = make_branch(store, "b", cfg, rng);
  Image zero(32, 32);
  TokenGrid g = patch_embed(zero, cfg, bp);
  for (double v : g.tokens.value()) CHECK(v == 0.0);
  CHECK(g.grid_h == 8);
}

TEST_CASE("stage shapes follow the resolution ledger") {
  ParamStore store;
  Rng rng(4);
  BackboneConfig cfg = tiny_config(64, 8);
  BranchParams bp = make_branch(store, "b", cfg, rng);
  BranchPlans plans = make_branch_plans(cfg);
  StageBundle out = forward_branch(random_image(64, 5), cfg, bp, plans, RuntimeOpts{});
  // 64px, P=4, C=8: (8x8)x16, (4x4)x32, (2x2)x64, (2x2)x64
  CHECK(out.grids[0].grid_h == 8);
  CHECK(out.grids[0].channels == 16);
  CHECK(out.grids[1].grid_h == 4);
  CHECK(out.grids[1].channels == 32);
  CHECK(out.grids[2].grid_h == 2);
  CHECK(out.grids[2].channels == 64);
  CHECK(out.grids[3].grid_h == 2);
  CHECK(out.grids[3].channels == 64);  // stage 4 omits patch merging
  for (int s = 0; s < 4; ++s) CHECK(out.stage_logits[static_cast<size_t>(s)].shape() == Shape{3});
}

TEST_CASE("depth-zero stages still produce the shape ledger") {
  ParamStore store;
  Rng rng(5);
  BackboneConfig cfg = tiny_config(64, 4);
  cfg.depths = {0, 0, 0, 0};
  BranchParams bp = make_branch(store, "b", cfg, rng);
  BranchPlans plans = make_branch_plans(cfg);
  StageBundle out = forward_branch(random_image(64, 6), cfg, bp, plans, RuntimeOpts{});
  CHECK(out.grids[0].grid_h == 8);
  CHECK(out.grids[1].grid_h == 4);
  CHECK(out.grids[2].grid_h == 2);
  CHECK(out.grids[3].grid_h == 2);
}

TEST_CASE("config validation rejects bad geometry") {
  BackboneConfig cfg = tiny_config();
  cfg.image_size = 48;  // 48/4 = 12, not divisible by 8
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.heads = {3, 2, 2, 2};  // 3 does not divide 4
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("stage head: pooling and linear map") {
  ParamStore store;
  Rng rng(7);
  LinearParams head;
  head.w = store.create("h.w", {3, 6});
  head.b = store.create("h.b", {3});
  init_const(head.b, 0.25);

  // constant grid with zero weights -> logits = bias
  TokenGrid g;
  g.tokens = Tensor::constant({10, 6}, 1.5);
  g.grid_h = 5;
  g.grid_w = 2;
  g.channels = 6;
  Tensor logits = stage_head(g, head);
  for (double v : logits.value()) CHECK(v == doctest::Approx(0.25));

  // hand matrix-multiply oracle
  init_trunc_normal(head.w, rng, 0.5);
  std::vector<double> tok(static_cast<size_t>(10 * 6));
  for (auto& v : tok) v = rng.normal(0.0, 1.0);
  g.tokens = Tensor::from_data({10, 6}, tok);
  logits = stage_head(g, head);
  for (int o = 0; o < 3; ++o) {
    double expect = head.b.value()[static_cast<size_t>(o)];
    for (int j = 0; j < 6; ++j) {
      double mean = 0.0;
      for (int i = 0; i < 10; ++i) mean += tok[static_cast<size_t>(i) * 6 + j];
      mean /= 10.0;
      expect += head.w.value()[static_cast<size_t>(o) * 6 + j] * mean;
    }
    CHECK(logits.value()[static_cast<size_t>(o)] == doctest::Approx(expect).epsilon(1e-12));
  }

  // permutation invariance of the token order
  std::vector<double> perm_tok = tok;
  std::swap_ranges(perm_tok.begin(), perm_tok.begin() + 6, perm_tok.begin() + 24);
  TokenGrid gp = g;
  gp.tokens = Tensor::from_data({10, 6}, perm_tok);
  Tensor logits_p = stage_head(gp, head);
  for (int o = 0; o < 3; ++o)
    CHECK(logits_p.value()[static_cast<size_t>(o)] ==
          doctest::Approx(logits.value()[static_cast<size_t>(o)]).epsilon(1e-12));
}

TEST_CASE("stage heads are pure read-outs") {
  ParamStore store;
  Rng rng(8);
  BackboneConfig cfg = tiny_config();
  BranchParams bp = make_branch(store, "b", cfg, rng);
  BranchPlans plans = make_branch_plans(cfg);
  Image img = random_image(32, 9);
  StageBundle a = forward_branch(img, cfg, bp, plans, RuntimeOpts{});
  // clobber the head weights; grids must not move
  for (int s = 0; s < 4; ++s) {
    init_const(bp.stages[static_cast<size_t>(s)].head.w, 7.0);
    init_const(bp.stages[static_cast<size_t>(s)].head.b, -2.0);
  }
  StageBundle b = forward_branch(img, cfg, bp, plans, RuntimeOpts{});
  for (int s = 0; s < 4; ++s)
    CHECK(a.grids[static_cast<size_t>(s)].tokens.value() ==
          b.grids[static_cast<size_t>(s)].tokens.value());
}

TEST_CASE("independent initializations give different stage logits") {
  BackboneConfig cfg = tiny_config();
  ParamStore s1, s2;
  Rng r1(100), r2(200);
  BranchParams b1 = make_branch(s1, "wib", cfg, r1);
  BranchParams b2 = make_branch(s2, "lrb", cfg, r2);
  BranchPlans plans = make_branch_plans(cfg);
  Image img = random_image(32, 10);
  StageBundle o1 = forward_branch(img, cfg, b1, plans, RuntimeOpts{});
  StageBundle o2 = forward_branch(img, cfg, b2, plans, RuntimeOpts{});
  CHECK(o1.stage_logits[3].value() != o2.stage_logits[3].value());
}

TEST_CASE("parameter names are disjoint across branches") {
  BackboneConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(11);
  make_branch(store, "wib", cfg, rng);
  make_branch(store, "lrb", cfg, rng);  // duplicate names would throw
  int wib = 0, lrb = 0;
  for (const auto& n : store.names()) {
    if (n.rfind("wib.", 0) == 0) ++wib;
    if (n.rfind("lrb.", 0) == 0) ++lrb;
  }
  CHECK(wib == lrb);
  CHECK(wib + lrb == store.count());
}

TEST_CASE("window plans: padding and shift partition back correctly") {
  // 6x6 grid, window 4 -> padded to 8; shifted variant too
  for (int shift : {0, 2}) {
    WindowPlan plan = plan_windows(6, 6, 4, shift);
    CHECK(plan.num_windows == 4);
    CHECK(plan.t == 16);
    CHECK(plan.needs_mask);
    // reverse(partition) must be the identity over valid tokens
    std::vector<int> seen(36, 0);
    for (int i = 0; i < 36; ++i) {
      int row = plan.reverse_idx[static_cast<size_t>(i)];
      REQUIRE(row >= 0);
      CHECK(plan.partition_idx[static_cast<size_t>(row)] == i);
      ++seen[static_cast<size_t>(i)];
    }
    for (int v : seen) CHECK(v == 1);
  }
  // grid smaller than the window: single window, no shift, no padding mask
  WindowPlan tiny = plan_windows(2, 2, 4, 2);
  CHECK(tiny.ws == 2);
  CHECK(tiny.shift == 0);
  CHECK(tiny.num_windows == 1);
  CHECK_FALSE(tiny.needs_mask);
}

TEST_CASE("windowed grids not divisible by the window still run") {
  // image 96: stage grids 24, 12, 6 (padded), 3 (window clamped)
  ParamStore store;
  Rng rng(12);
  BackboneConfig cfg = tiny_config(96, 4);
  cfg.depths = {2, 2, 2, 2};  // exercise shifted blocks everywhere
  BranchParams bp = make_branch(store, "b", cfg, rng);
  BranchPlans plans = make_branch_plans(cfg);
  StageBundle out = forward_branch(random_image(96, 13), cfg, bp, plans, RuntimeOpts{});
  CHECK(out.grids[0].grid_h == 12);
  CHECK(out.grids[1].grid_h == 6);
  CHECK(out.grids[2].grid_h == 3);
  CHECK(out.grids[3].grid_h == 3);
  for (double v : out.grids[3].tokens.value()) CHECK(std::isfinite(v));
}

TEST_CASE("block gradients flow: finite differences through a stage") {
  for (BlockFamily fam : {BlockFamily::swinv2, BlockFamily::prenorm}) {
    ParamStore store;
    Rng rng(14);
    BackboneConfig cfg = tiny_config(32, 2, fam);
    cfg.depths = {2, 1, 1, 1};  // shifted window in stage 1
    cfg.heads = {1, 1, 1, 1};
    cfg.window_size = 2;
    BranchParams bp = make_branch(store, "b", cfg, rng);
    BranchPlans plans = make_branch_plans(cfg);
    Image img = random_image(32, 15);

    auto loss_value = [&] {
      NoGradGuard ng;
      TokenGrid g = patch_embed(img, cfg, bp);
      g = run_stage(g, 0, cfg, bp.stages[0], plans, RuntimeOpts{});
      double s = 0.0;
      for (size_t i = 0; i < g.tokens.value().size(); ++i)
        s += g.tokens.value()[i] * (i % 3 == 0 ? 1.0 : -0.5);
      return s;
    };
    // analytic
    TokenGrid g = patch_embed(img, cfg, bp);
    g = run_stage(g, 0, cfg, bp.stages[0], plans, RuntimeOpts{});
    std::vector<double> w(g.tokens.value().size());
    for (size_t i = 0; i < w.size(); ++i) w[i] = (i % 3 == 0 ? 1.0 : -0.5);
    Tensor wrow = Tensor::from_data({1, static_cast<int>(w.size())}, w);
    Tensor root = reshape(matmul(wrow, reshape(g.tokens, {static_cast<int>(w.size()), 1})), {1});
    std::vector<std::vector<double>> grads(static_cast<size_t>(store.count()));
    backward(root, GradSink{&grads});

    // step 1e-6: the scaled-cosine path's 1/|q| curvature inflates central
    // difference truncation error at larger steps
    Rng pick(16);
    const double h = 1e-6;
    int checked = 0;
    for (int rep = 0; rep < 24; ++rep) {
      int pi = static_cast<int>(pick.uniform_int(static_cast<uint64_t>(store.count())));
      Tensor& t = store.tensors()[static_cast<size_t>(pi)];
      if (grads[static_cast<size_t>(pi)].empty()) continue;  // param not in stage-1 subgraph
      int ei = static_cast<int>(pick.uniform_int(static_cast<uint64_t>(t.numel())));
      double orig = t.raw_value()[static_cast<size_t>(ei)];
      t.raw_value()[static_cast<size_t>(ei)] = orig + h;
      double fp = loss_value();
      t.raw_value()[static_cast<size_t>(ei)] = orig - h;
      double fm = loss_value();
      t.raw_value()[static_cast<size_t>(ei)] = orig;
      double fd = (fp - fm) / (2 * h);
      double an = grads[static_cast<size_t>(pi)][static_cast<size_t>(ei)];
      CHECK(std::fabs(fd - an) <= 1e-4 * std::max({1.0, std::fabs(fd), std::fabs(an)}));
      ++checked;
    }
    CHECK(checked >= 10);
  }
}
