#include "samswin/laem.hpp"

#include <cmath>

namespace samswin {

std::array<bool, 4> MsLaemConfig::active_stages() const {
  check(count >= 0 && count <= 4, "laem: count must be 0..4");
  std::array<bool, 4> a{false, false, false, false};
  for (int s = 4 - count; s < 4; ++s) a[static_cast<size_t>(s)] = true;
  return a;
}

LaemParams make_laem(ParamStore& store, const std::string& prefix, int channels, int heads,
                     Rng& rng, bool use_out_proj) {
  check(channels % heads == 0, "laem: heads must divide channels");
  LaemParams p;
  p.heads = heads;
  p.use_out_proj = use_out_proj;
  auto mk = [&](const std::string& n) {
    LinearParams lp;
    lp.w = store.create(prefix + "." + n + ".w", {channels, channels});
    init_trunc_normal(lp.w, rng);
    lp.b = store.create(prefix + "." + n + ".b", {channels});
    return lp;
  };
  p.q_proj = mk("q_proj");
  p.k_proj = mk("k_proj");
  p.v_proj = mk("v_proj");
  if (use_out_proj) p.out_proj = mk("out_proj");
  p.gate = store.create(prefix + ".gate", {1});  // zero-initialized by contract
  return p;
}

namespace {

struct AttnOut {
  Tensor z;      // (n_lesion, c)
  Tensor probs;  // (heads, n_lesion, n_whole)
};

AttnOut cross_attend_impl(const TokenGrid& whole, const TokenGrid& lesion,
                          const LaemParams& params) {
  check(whole.channels == lesion.channels, "cross_attend: channel mismatch");
  const int c = whole.channels;
  const int h = params.heads;
  check(c % h == 0, "cross_attend: heads must divide channels");
  const int dk = c / h;
  const int nl = lesion.grid_h * lesion.grid_w;
  const int nw = whole.grid_h * whole.grid_w;

  Tensor q = linear(lesion.tokens, params.q_proj.w, params.q_proj.b);  // (nl, c)
  Tensor k = linear(whole.tokens, params.k_proj.w, params.k_proj.b);   // (nw, c)
  Tensor v = linear(whole.tokens, params.v_proj.w, params.v_proj.b);

  auto to_heads = [&](const Tensor& m, int n) {
    Tensor r = reshape(m, {n, h, dk});
    r = permute(r, {1, 0, 2});  // (h, n, dk)
    return r;
  };
  Tensor qh = to_heads(q, nl);
  Tensor kh = to_heads(k, nw);
  Tensor vh = to_heads(v, nw);

  Tensor scores = bmm(qh, kh, /*trans_b=*/true);  // (h, nl, nw)
  scores = mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(dk)));
  Tensor probs = softmax_lastdim(scores);
  Tensor z = bmm(probs, vh);            // (h, nl, dk)
  z = permute(z, {1, 0, 2});            // (nl, h, dk)
  z = reshape(z, {nl, c});
  if (params.use_out_proj) z = linear(z, params.out_proj.w, params.out_proj.b);
  return {z, probs};
}

}  // namespace

Tensor cross_attend(const TokenGrid& whole, const TokenGrid& lesion, const LaemParams& params) {
  return cross_attend_impl(whole, lesion, params).z;
}

TokenGrid enhance(const TokenGrid& whole, const TokenGrid& lesion, const LaemParams& params) {
  check(whole.grid_h == lesion.grid_h && whole.grid_w == lesion.grid_w &&
            whole.channels == lesion.channels,
        "enhance: branch grids must share stage geometry");
  Tensor z = cross_attend(whole, lesion, params);
  Tensor gated = scale_by(z, params.gate);
  return {add(whole.tokens, gated), whole.grid_h, whole.grid_w, whole.channels};
}

std::vector<std::vector<double>> dump_attention(const TokenGrid& whole, const TokenGrid& lesion,
                                                const LaemParams& params) {
  NoGradGuard ng;
  AttnOut out = cross_attend_impl(whole, lesion, params);
  const int h = params.heads;
  const int nl = lesion.grid_h * lesion.grid_w;
  const int nw = whole.grid_h * whole.grid_w;
  std::vector<std::vector<double>> maps(static_cast<size_t>(h));
  const auto& pv = out.probs.value();
  for (int j = 0; j < h; ++j)
    maps[static_cast<size_t>(j)].assign(pv.begin() + static_cast<int64_t>(j) * nl * nw,
                                        pv.begin() + static_cast<int64_t>(j + 1) * nl * nw);
  return maps;
}

}  // namespace samswin
