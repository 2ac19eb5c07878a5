#pragma once

#include <array>
#include <functional>
#include <memory>

#include "samswin/image.hpp"
#include "samswin/params.hpp"
#include "samswin/tensor.hpp"

namespace samswin {

enum class BlockFamily { swinv2, prenorm };
BlockFamily block_family_from_string(const std::string& s);
const char* block_family_name(BlockFamily f);

// Shared encoder configuration for both branches. Stage i (1-based) runs its
// blocks at width C*2^(i-1); stages 1-3 end with a patch-merging layer, so the
// stage outputs have widths 2C, 4C, 8C, 8C at grid fractions 1/8, 1/16, 1/32,
// 1/32 of the input.
struct BackboneConfig {
  int image_size = 64;
  int patch_size = 4;
  int embed_dim = 32;                     // C
  std::array<int, 4> depths = {1, 1, 2, 1};
  std::array<int, 4> heads = {2, 4, 8, 8};
  int window_size = 4;
  int num_classes = 3;
  double drop_rate = 0.0;
  double mlp_ratio = 4.0;
  BlockFamily family = BlockFamily::swinv2;  // post-norm, scaled-cosine attention

  void validate() const;
  int block_width(int stage) const { return embed_dim << stage; }      // stage 0..3
  int out_width(int stage) const { return stage < 3 ? embed_dim << (stage + 1) : embed_dim << 3; }
  int out_grid(int stage) const {
    int g = image_size / patch_size;
    return stage < 3 ? g >> (stage + 1) : g >> 3;
  }
};

// A stage's feature map: (grid_h*grid_w, channels) tokens with explicit
// spatial bookkeeping.
struct TokenGrid {
  Tensor tokens;
  int grid_h = 0;
  int grid_w = 0;
  int channels = 0;
};

struct StageBundle {
  std::array<TokenGrid, 4> grids;        // per-stage outputs (post-enhancement on the WIB)
  std::array<Tensor, 4> stage_logits;    // auxiliary heads, computed pre-enhancement
};

// ---------------------------------------------------------------------------
// window partition plan (fixed geometry, shared across forward passes)
// ---------------------------------------------------------------------------

// Gather/scatter indices plus attention masks for one (grid, window, shift)
// combination. Grids not divisible by the window are zero-padded and masked,
// then cropped on reverse.
struct WindowPlan {
  int ws = 0;            // effective window side
  int shift = 0;
  int t = 0;             // ws*ws tokens per window
  int num_windows = 0;
  std::vector<int> partition_idx;  // (num_windows*t), -1 = padded slot
  std::vector<int> reverse_idx;    // (h*w) -> row in windowed layout
  bool needs_mask = false;
  std::shared_ptr<std::vector<std::vector<double>>> masks;  // per window, t*t additive
  std::shared_ptr<std::vector<int>> rel_idx;                // (t*t) relative-position index
  int rel_count = 0;                                        // (2ws-1)^2
};

WindowPlan plan_windows(int grid_h, int grid_w, int window, int shift);

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

struct LinearParams {
  Tensor w;  // (out, in)
  Tensor b;  // (out), may be undefined
};

struct NormParams {
  Tensor gamma, beta;
};

struct BlockParams {
  LinearParams qkv, proj, mlp_fc1, mlp_fc2;
  NormParams norm1, norm2;
  Tensor rpb_table;    // ((2ws-1)^2, heads)
  Tensor logit_scale;  // (heads), swinv2 family only
};

struct StageParams {
  std::vector<BlockParams> blocks;
  LinearParams merge;  // stages 1-3 only (no bias)
  NormParams merge_norm;
  LinearParams head;   // per-stage projection head on the stage output
};

struct BranchParams {
  LinearParams patch_proj;
  NormParams patch_norm;
  std::array<StageParams, 4> stages;
};

// Registers all branch parameters under `prefix.` and initializes them.
BranchParams make_branch(ParamStore& store, const std::string& prefix, const BackboneConfig& cfg,
                         Rng& rng);

// ---------------------------------------------------------------------------
// forward ops
// ---------------------------------------------------------------------------

struct RuntimeOpts {
  bool train = false;        // dropout active only when training
  uint64_t dropout_seed = 0; // stream seed for this forward pass
};

// Non-overlapping patch_size^2 patches, flattened to 3*P^2 values in
// (py, px, channel) order and linearly projected to C channels.
TokenGrid patch_embed(const Image& image, const BackboneConfig& cfg, const BranchParams& params);

// Window plans for each stage of a branch (index 0..3), unshifted + shifted.
struct BranchPlans {
  std::array<WindowPlan, 4> plain;
  std::array<WindowPlan, 4> shifted;
};
BranchPlans make_branch_plans(const BackboneConfig& cfg);

// Runs stage `stage` (0-based): depths[stage] windowed transformer blocks
// (alternating blocks use the shifted partition), then patch merging for
// stages 0-2.
TokenGrid run_stage(const TokenGrid& input, int stage, const BackboneConfig& cfg,
                    const StageParams& params, const BranchPlans& plans, const RuntimeOpts& opts);

// Global average pool over tokens followed by a linear map to num_classes.
Tensor stage_head(const TokenGrid& grid, const LinearParams& head);

// Optional per-stage enhancement hook (the MS-LAEM attachment point); returns
// the grid that feeds the next stage.
using EnhanceFn = std::function<TokenGrid(int stage, const TokenGrid& grid)>;

// patch_embed then stages 1..4. When `enhance` is provided the stage-i output
// is replaced by the enhanced grid before feeding stage i+1 (and before the
// final read-out); stage heads always see the pre-enhancement grids.
StageBundle forward_branch(const Image& image, const BackboneConfig& cfg,
                           const BranchParams& params, const BranchPlans& plans,
                           const RuntimeOpts& opts, const EnhanceFn& enhance = nullptr);

}  // namespace samswin
