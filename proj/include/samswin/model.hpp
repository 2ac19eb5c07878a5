#pragma once

#include <memory>
#include <optional>

#include "samswin/laem.hpp"
#include "samswin/objective.hpp"

namespace samswin {

struct ModelConfig {
  BackboneConfig backbone;
  bool with_wib = true;
  bool with_lrb = true;
  int laem_count = 4;         // effective only when both branches are present
  bool laem_out_proj = true;
  uint64_t init_seed = 0;

  void validate() const;
  bool laem_effective() const { return with_wib && with_lrb && laem_count > 0; }
};

// The twin-encoder network: WIB and LRB instances of the shared backbone
// architecture with independent weights, per-stage LAEMs on the WIB, and the
// fusion classification head.
class SamSwinModel {
 public:
  explicit SamSwinModel(const ModelConfig& cfg);

  struct Output {
    std::optional<StageBundle> wib, lrb;
    Tensor features;  // pooled fusion features, the classification head input
    Tensor cls_logits;
  };

  // `whole` feeds the WIB, `lesion` the LRB; single-branch variants ignore
  // the missing input (it may be empty for M1).
  Output forward(const Image& whole, const Image& lesion, const RuntimeOpts& opts) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const std::vector<LaemParams>& laem_layers() const { return laems_; }  // per active stage 1..4
  std::array<bool, 4> laem_active() const { return MsLaemConfig{cfg_.laem_count}.active_stages(); }
  const BranchParams* wib_params() const { return wib_ ? &*wib_ : nullptr; }
  const BranchParams* lrb_params() const { return lrb_ ? &*lrb_ : nullptr; }
  const BranchPlans& plans() const { return plans_; }
  const MlpHeadParams& cls_head() const { return cls_head_; }

 private:
  ModelConfig cfg_;
  ParamStore params_;
  std::optional<BranchParams> wib_, lrb_;
  std::vector<LaemParams> laems_;  // indexed by stage 0..3, undefined gate when inactive
  MlpHeadParams cls_head_;
  BranchPlans plans_;
};

}  // namespace samswin
