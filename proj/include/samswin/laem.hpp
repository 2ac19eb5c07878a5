#pragma once

#include <array>
#include <vector>

#include "samswin/backbone.hpp"

namespace samswin {

// Lesion-aware enhancement: multi-head cross-attention with lesion-region
// queries against whole-image keys/values, scaled by a zero-initialized
// learnable gate and merged residually onto the whole-image tokens.
struct LaemParams {
  LinearParams q_proj, k_proj, v_proj, out_proj;  // out_proj optional
  int heads = 1;
  Tensor gate;  // one learnable scalar, exactly 0 at initialization
  bool use_out_proj = true;
};

// Count n selects stages {5-n, ..., 4} (later-to-earlier inclusion).
struct MsLaemConfig {
  int count = 4;  // 0..4
  std::array<bool, 4> active_stages() const;  // index 0 = stage 1
};

LaemParams make_laem(ParamStore& store, const std::string& prefix, int channels, int heads,
                     Rng& rng, bool use_out_proj = true);

// Per head j: z_j = softmax(Q_j K_j^T / sqrt(d_k)) V_j with Q from lesion
// tokens and K,V from whole tokens; heads concatenated, then the output
// projection. Result has the lesion token count at the stage width.
Tensor cross_attend(const TokenGrid& whole, const TokenGrid& lesion, const LaemParams& params);

// x'_w = x_w + g * z, token-wise (both branches share stage geometry).
TokenGrid enhance(const TokenGrid& whole, const TokenGrid& lesion, const LaemParams& params);

// Row-stochastic attention maps, one (lesion_tokens x whole_tokens) matrix per
// head. Values only (no graph).
std::vector<std::vector<double>> dump_attention(const TokenGrid& whole, const TokenGrid& lesion,
                                                const LaemParams& params);

}  // namespace samswin
