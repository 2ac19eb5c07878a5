#include "samswin/backbone.hpp"

#include <cmath>

namespace samswin {

BlockFamily block_family_from_string(const std::string& s) {
  if (s == "swinv2") return BlockFamily::swinv2;
  if (s == "prenorm") return BlockFamily::prenorm;
  throw Error("unknown block family: " + s);
}

const char* block_family_name(BlockFamily f) {
  return f == BlockFamily::swinv2 ? "swinv2" : "prenorm";
}

void BackboneConfig::validate() const {
  check(patch_size > 0 && image_size > 0, "backbone: sizes must be positive");
  check(image_size % patch_size == 0, "backbone: image_size not divisible by patch_size");
  check((image_size / patch_size) % 8 == 0,
        "backbone: image_size/patch_size must be divisible by 8");
  check(embed_dim > 0, "backbone: embed_dim must be positive");
  check(window_size > 0, "backbone: window_size must be positive");
  check(num_classes >= 2, "backbone: num_classes must be >= 2");
  check(drop_rate >= 0.0 && drop_rate < 1.0, "backbone: drop_rate out of range");
  check(mlp_ratio > 0.0, "backbone: mlp_ratio must be positive");
  for (int i = 0; i < 4; ++i) {
    check(depths[static_cast<size_t>(i)] >= 0, "backbone: negative depth");
    check(heads[static_cast<size_t>(i)] > 0, "backbone: heads must be positive");
    check(block_width(i) % heads[static_cast<size_t>(i)] == 0,
          "backbone: heads[" + std::to_string(i) + "] must divide the stage channel width");
  }
}

// ---------------------------------------------------------------------------
// window plans
// ---------------------------------------------------------------------------

WindowPlan plan_windows(int grid_h, int grid_w, int window, int shift) {
  WindowPlan plan;
  int ws = std::min(window, std::min(grid_h, grid_w));
  if (ws >= grid_h && ws >= grid_w) shift = 0;  // single window covers the grid
  plan.ws = ws;
  plan.shift = shift;
  plan.t = ws * ws;
  const int hp = (grid_h + ws - 1) / ws * ws;
  const int wp = (grid_w + ws - 1) / ws * ws;
  const int nwy = hp / ws, nwx = wp / ws;
  plan.num_windows = nwy * nwx;
  const bool padded = (hp != grid_h) || (wp != grid_w);
  plan.needs_mask = padded || shift > 0;

  // Region ids on the padded pre-roll map; tokens may attend within a window
  // only if they share a region (wrap-around pieces must not mix).
  auto region_of = [&](int y, int x) -> int {
    if (y >= grid_h || x >= grid_w) return -1;  // padding
    if (shift == 0) return 0;
    int ry = y < hp - ws ? 0 : (y < hp - shift ? 1 : 2);
    int rx = x < wp - ws ? 0 : (x < wp - shift ? 1 : 2);
    return ry * 3 + rx;
  };

  plan.partition_idx.assign(static_cast<size_t>(plan.num_windows) * plan.t, -1);
  std::vector<int> region(static_cast<size_t>(plan.num_windows) * plan.t, -1);
  for (int wy = 0; wy < nwy; ++wy)
    for (int wx = 0; wx < nwx; ++wx)
      for (int iy = 0; iy < ws; ++iy)
        for (int ix = 0; ix < ws; ++ix) {
          int y = wy * ws + iy, x = wx * ws + ix;          // padded, post-roll coords
          int sy = (y + shift) % hp, sx = (x + shift) % wp;  // pre-roll source
          size_t row = static_cast<size_t>((wy * nwx + wx) * plan.t + iy * ws + ix);
          if (sy < grid_h && sx < grid_w) plan.partition_idx[row] = sy * grid_w + sx;
          region[row] = region_of(sy, sx);
        }

  plan.reverse_idx.assign(static_cast<size_t>(grid_h) * grid_w, -1);
  for (int y = 0; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x) {
      int yp = (y - shift + hp) % hp, xp = (x - shift + wp) % wp;
      int win = (yp / ws) * nwx + xp / ws;
      int inwin = (yp % ws) * ws + xp % ws;
      plan.reverse_idx[static_cast<size_t>(y) * grid_w + x] = win * plan.t + inwin;
    }

  if (plan.needs_mask) {
    auto masks = std::make_shared<std::vector<std::vector<double>>>(
        static_cast<size_t>(plan.num_windows));
    constexpr double kNegInf = -1e9;
    for (int w = 0; w < plan.num_windows; ++w) {
      auto& m = (*masks)[static_cast<size_t>(w)];
      m.assign(static_cast<size_t>(plan.t) * plan.t, 0.0);
      for (int i = 0; i < plan.t; ++i)
        for (int j = 0; j < plan.t; ++j) {
          int ri = region[static_cast<size_t>(w * plan.t + i)];
          int rj = region[static_cast<size_t>(w * plan.t + j)];
          if (rj < 0 || ri != rj) m[static_cast<size_t>(i) * plan.t + j] = kNegInf;
        }
    }
    plan.masks = std::move(masks);
  }

  // Relative position index between in-window token pairs.
  plan.rel_count = (2 * ws - 1) * (2 * ws - 1);
  auto rel = std::make_shared<std::vector<int>>(static_cast<size_t>(plan.t) * plan.t);
  for (int i = 0; i < plan.t; ++i)
    for (int j = 0; j < plan.t; ++j) {
      int dy = i / ws - j / ws + ws - 1;
      int dx = i % ws - j % ws + ws - 1;
      (*rel)[static_cast<size_t>(i) * plan.t + j] = dy * (2 * ws - 1) + dx;
    }
  plan.rel_idx = std::move(rel);
  return plan;
}

BranchPlans make_branch_plans(const BackboneConfig& cfg) {
  BranchPlans plans;
  int grid = cfg.image_size / cfg.patch_size;
  for (int s = 0; s < 4; ++s) {
    int g = s == 0 ? grid : cfg.out_grid(s - 1);  // grid the stage's blocks run on
    int ws = std::min(cfg.window_size, g);
    plans.plain[static_cast<size_t>(s)] = plan_windows(g, g, cfg.window_size, 0);
    int shift = (g > ws && ws > 1) ? ws / 2 : 0;
    plans.shifted[static_cast<size_t>(s)] = plan_windows(g, g, cfg.window_size, shift);
  }
  return plans;
}

// ---------------------------------------------------------------------------
// parameter construction
// ---------------------------------------------------------------------------

namespace {

LinearParams make_linear(ParamStore& store, const std::string& name, int out, int in, Rng& rng,
                         bool bias = true) {
  LinearParams p;
  p.w = store.create(name + ".w", {out, in});
  init_trunc_normal(p.w, rng);
  if (bias) {
    p.b = store.create(name + ".b", {out});
  }
  return p;
}

NormParams make_norm(ParamStore& store, const std::string& name, int c) {
  NormParams p;
  p.gamma = store.create(name + ".gamma", {c});
  init_const(p.gamma, 1.0);
  p.beta = store.create(name + ".beta", {c});
  return p;
}

}  // namespace

BranchParams make_branch(ParamStore& store, const std::string& prefix, const BackboneConfig& cfg,
                         Rng& rng) {
  cfg.validate();
  BranchParams bp;
  const int in_dim = 3 * cfg.patch_size * cfg.patch_size;
  bp.patch_proj = make_linear(store, prefix + ".patch_embed.proj", cfg.embed_dim, in_dim, rng);
  bp.patch_norm = make_norm(store, prefix + ".patch_embed.norm", cfg.embed_dim);

  for (int s = 0; s < 4; ++s) {
    StageParams& sp = bp.stages[static_cast<size_t>(s)];
    const int c = cfg.block_width(s);
    const int h = cfg.heads[static_cast<size_t>(s)];
    const int g = s == 0 ? cfg.image_size / cfg.patch_size : cfg.out_grid(s - 1);
    const int ws = std::min(cfg.window_size, g);
    const int rel = (2 * ws - 1) * (2 * ws - 1);
    const int hidden = std::max(1, static_cast<int>(std::lround(c * cfg.mlp_ratio)));
    const std::string sname = prefix + ".stage" + std::to_string(s + 1);
    for (int b = 0; b < cfg.depths[static_cast<size_t>(s)]; ++b) {
      BlockParams blk;
      const std::string bname = sname + ".block" + std::to_string(b);
      blk.qkv = make_linear(store, bname + ".attn.qkv", 3 * c, c, rng);
      blk.proj = make_linear(store, bname + ".attn.proj", c, c, rng);
      blk.rpb_table = store.create(bname + ".attn.rpb", {rel, h});
      if (cfg.family == BlockFamily::swinv2) {
        blk.logit_scale = store.create(bname + ".attn.logit_scale", {h});
        init_const(blk.logit_scale, std::log(10.0));
      }
      blk.norm1 = make_norm(store, bname + ".norm1", c);
      blk.norm2 = make_norm(store, bname + ".norm2", c);
      blk.mlp_fc1 = make_linear(store, bname + ".mlp.fc1", hidden, c, rng);
      blk.mlp_fc2 = make_linear(store, bname + ".mlp.fc2", c, hidden, rng);
      sp.blocks.push_back(std::move(blk));
    }
    if (s < 3) {
      sp.merge = make_linear(store, sname + ".merge.reduction", 2 * c, 4 * c, rng, /*bias=*/false);
      sp.merge_norm = make_norm(store, sname + ".merge.norm", 2 * c);
    }
    const int out_c = cfg.out_width(s);
    sp.head = make_linear(store, sname + ".head", cfg.num_classes, out_c, rng);
  }
  return bp;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

TokenGrid patch_embed(const Image& image, const BackboneConfig& cfg, const BranchParams& params) {
  check(image.h % cfg.patch_size == 0 && image.w % cfg.patch_size == 0,
        "patch_embed: image size not divisible by patch size");
  const int P = cfg.patch_size;
  const int gh = image.h / P, gw = image.w / P;
  const int in_dim = 3 * P * P;
  std::vector<double> data(static_cast<size_t>(gh) * gw * in_dim);
  for (int py = 0; py < gh; ++py)
    for (int px = 0; px < gw; ++px) {
      double* dst = data.data() + (static_cast<size_t>(py) * gw + px) * in_dim;
      int k = 0;
      for (int iy = 0; iy < P; ++iy)
        for (int ix = 0; ix < P; ++ix)
          for (int ch = 0; ch < 3; ++ch) dst[k++] = image.at(py * P + iy, px * P + ix, ch);
    }
  Tensor patches = Tensor::from_data({gh * gw, in_dim}, std::move(data));
  Tensor tok = linear(patches, params.patch_proj.w, params.patch_proj.b);
  tok = layer_norm(tok, params.patch_norm.gamma, params.patch_norm.beta);
  return {tok, gh, gw, cfg.embed_dim};
}

namespace {

constexpr double kMaxLogitScale = 4.605170185988091;  // ln(100)

thread_local uint64_t g_drop_counter = 0;

Tensor maybe_dropout(const Tensor& x, const BackboneConfig& cfg, const RuntimeOpts& opts) {
  if (!opts.train || cfg.drop_rate == 0.0) return x;
  return dropout(x, cfg.drop_rate, mix_seed(opts.dropout_seed, ++g_drop_counter));
}

Tensor window_attention(const Tensor& x, int heads, const WindowPlan& plan,
                        const BlockParams& blk, BlockFamily family) {
  const int c = x.dim(1);
  const int dk = c / heads;
  const int nw = plan.num_windows, t = plan.t;

  Tensor xw = gather_rows(x, plan.partition_idx);  // (nw*t, c)
  Tensor qkv = linear(xw, blk.qkv.w, blk.qkv.b);
  Tensor q = slice_cols(qkv, 0, c);
  Tensor k = slice_cols(qkv, c, c);
  Tensor v = slice_cols(qkv, 2 * c, c);

  auto to_heads = [&](const Tensor& m) {
    Tensor r = reshape(m, {nw, t, heads, dk});
    r = permute(r, {0, 2, 1, 3});  // (nw, heads, t, dk)
    return reshape(r, {nw * heads, t, dk});
  };

  Tensor scores;
  if (family == BlockFamily::swinv2) {
    // scaled cosine attention: cos(q,k) * exp(per-head logit scale)
    Tensor qn = normalize_rows(reshape(q, {nw * t * heads, dk}));
    Tensor kn = normalize_rows(reshape(k, {nw * t * heads, dk}));
    // note: rows above are (token, head) pairs laid out as (nw, t, heads, dk)
    Tensor qh = to_heads(reshape(qn, {nw * t, c}));
    Tensor kh = to_heads(reshape(kn, {nw * t, c}));
    scores = bmm(qh, kh, /*trans_b=*/true);
    scores = scale_per_head(scores, blk.logit_scale, heads, kMaxLogitScale);
  } else {
    Tensor qh = to_heads(q);
    Tensor kh = to_heads(k);
    scores = bmm(qh, kh, /*trans_b=*/true);
    scores = mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(dk)));
  }
  scores = add_position_bias(scores, blk.rpb_table, plan.rel_idx, heads);
  if (plan.needs_mask) {
    auto group = std::make_shared<std::vector<int>>(static_cast<size_t>(nw * heads));
    for (int b = 0; b < nw * heads; ++b) (*group)[static_cast<size_t>(b)] = b / heads;
    scores = add_attn_mask(scores, plan.masks, group);
  }
  Tensor probs = softmax_lastdim(scores);
  Tensor vh = to_heads(v);
  Tensor out = bmm(probs, vh);  // (nw*heads, t, dk)
  out = reshape(out, {nw, heads, t, dk});
  out = permute(out, {0, 2, 1, 3});
  out = reshape(out, {nw * t, c});
  out = linear(out, blk.proj.w, blk.proj.b);
  return gather_rows(out, plan.reverse_idx);  // crop padding, undo shift
}

Tensor mlp_forward(const Tensor& x, const BlockParams& blk) {
  Tensor h = linear(x, blk.mlp_fc1.w, blk.mlp_fc1.b);
  h = gelu(h);
  return linear(h, blk.mlp_fc2.w, blk.mlp_fc2.b);
}

Tensor block_forward(const Tensor& x, int heads, const WindowPlan& plan, const BlockParams& blk,
                     const BackboneConfig& cfg, const RuntimeOpts& opts) {
  Tensor out;
  if (cfg.family == BlockFamily::swinv2) {
    // res-post-norm: x + LN(attn(x)), then x + LN(mlp(x))
    Tensor a = window_attention(x, heads, plan, blk, cfg.family);
    a = layer_norm(a, blk.norm1.gamma, blk.norm1.beta);
    out = add(x, maybe_dropout(a, cfg, opts));
    Tensor m = mlp_forward(out, blk);
    m = layer_norm(m, blk.norm2.gamma, blk.norm2.beta);
    out = add(out, maybe_dropout(m, cfg, opts));
  } else {
    Tensor a = window_attention(layer_norm(x, blk.norm1.gamma, blk.norm1.beta), heads, plan, blk,
                                cfg.family);
    out = add(x, maybe_dropout(a, cfg, opts));
    Tensor m = mlp_forward(layer_norm(out, blk.norm2.gamma, blk.norm2.beta), blk);
    out = add(out, maybe_dropout(m, cfg, opts));
  }
  return out;
}

// Concatenate each 2x2 token neighborhood (4c) and project to 2c.
TokenGrid patch_merge(const TokenGrid& g, const StageParams& sp) {
  check(g.grid_h % 2 == 0 && g.grid_w % 2 == 0, "patch_merge: odd grid");
  const int oh = g.grid_h / 2, ow = g.grid_w / 2;
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(oh) * ow * 4);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      idx.push_back((2 * y) * g.grid_w + 2 * x);
      idx.push_back((2 * y + 1) * g.grid_w + 2 * x);
      idx.push_back((2 * y) * g.grid_w + 2 * x + 1);
      idx.push_back((2 * y + 1) * g.grid_w + 2 * x + 1);
    }
  Tensor gathered = gather_rows(g.tokens, idx);               // (4*oh*ow, c)
  Tensor grouped = reshape(gathered, {oh * ow, 4 * g.channels});
  Tensor reduced = linear(grouped, sp.merge.w, sp.merge.b);   // (oh*ow, 2c)
  reduced = layer_norm(reduced, sp.merge_norm.gamma, sp.merge_norm.beta);
  return {reduced, oh, ow, 2 * g.channels};
}

}  // namespace

TokenGrid run_stage(const TokenGrid& input, int stage, const BackboneConfig& cfg,
                    const StageParams& params, const BranchPlans& plans, const RuntimeOpts& opts) {
  check(stage >= 0 && stage < 4, "run_stage: stage index out of range");
  const int expect_c = cfg.block_width(stage);
  check(input.channels == expect_c,
        "run_stage: channel mismatch, expected " + std::to_string(expect_c) + " got " +
            std::to_string(input.channels));
  TokenGrid g = input;
  const int heads = cfg.heads[static_cast<size_t>(stage)];
  for (size_t b = 0; b < params.blocks.size(); ++b) {
    const WindowPlan& plan = (b % 2 == 1) ? plans.shifted[static_cast<size_t>(stage)]
                                          : plans.plain[static_cast<size_t>(stage)];
    g.tokens = block_forward(g.tokens, heads, plan, params.blocks[b], cfg, opts);
  }
  if (stage < 3) g = patch_merge(g, params);
  return g;
}

Tensor stage_head(const TokenGrid& grid, const LinearParams& head) {
  Tensor pooled = mean_rows(grid.tokens);
  Tensor p2 = reshape(pooled, {1, grid.channels});
  Tensor logits = linear(p2, head.w, head.b);
  return reshape(logits, {head.w.dim(0)});
}

StageBundle forward_branch(const Image& image, const BackboneConfig& cfg,
                           const BranchParams& params, const BranchPlans& plans,
                           const RuntimeOpts& opts, const EnhanceFn& enhance) {
  g_drop_counter = 0;  // dropout stream is a pure function of opts.dropout_seed
  StageBundle out;
  TokenGrid g = patch_embed(image, cfg, params);
  for (int s = 0; s < 4; ++s) {
    g = run_stage(g, s, cfg, params.stages[static_cast<size_t>(s)], plans, opts);
    out.stage_logits[static_cast<size_t>(s)] =
        stage_head(g, params.stages[static_cast<size_t>(s)].head);
    if (enhance) g = enhance(s, g);
    out.grids[static_cast<size_t>(s)] = g;
  }
  return out;
}

}  // namespace samswin
