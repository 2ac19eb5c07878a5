#include "samswin/model.hpp"

namespace samswin {

void ModelConfig::validate() const {
  backbone.validate();
  check(with_wib || with_lrb, "model: at least one branch required");
  check(laem_count >= 0 && laem_count <= 4, "model: laem_count must be 0..4");
}

SamSwinModel::SamSwinModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix_seed(cfg_.init_seed, 0x5357494eULL));
  plans_ = make_branch_plans(cfg_.backbone);
  if (cfg_.with_wib) wib_ = make_branch(params_, "wib", cfg_.backbone, rng);
  if (cfg_.with_lrb) lrb_ = make_branch(params_, "lrb", cfg_.backbone, rng);

  laems_.resize(4);
  if (cfg_.laem_effective()) {
    auto active = laem_active();
    for (int s = 0; s < 4; ++s) {
      if (!active[static_cast<size_t>(s)]) continue;
      laems_[static_cast<size_t>(s)] =
          make_laem(params_, "laem.stage" + std::to_string(s + 1), cfg_.backbone.out_width(s),
                    cfg_.backbone.heads[static_cast<size_t>(s)], rng, cfg_.laem_out_proj);
    }
  }

  const int wide = cfg_.backbone.out_width(3);  // 8C
  const int in_dim = (cfg_.with_wib && cfg_.with_lrb) ? 2 * wide : wide;
  cls_head_ = make_mlp_head(params_, "cls_head", in_dim, wide, cfg_.backbone.num_classes, rng);
}

SamSwinModel::Output SamSwinModel::forward(const Image& whole, const Image& lesion,
                                           const RuntimeOpts& opts) const {
  Output out;
  if (cfg_.with_lrb) {
    RuntimeOpts lo = opts;
    lo.dropout_seed = mix_seed(opts.dropout_seed, 2);
    out.lrb = forward_branch(lesion, cfg_.backbone, *lrb_, plans_, lo);
  }
  if (cfg_.with_wib) {
    EnhanceFn enhance_fn = nullptr;
    if (cfg_.laem_effective()) {
      auto active = laem_active();
      const StageBundle* lrb_bundle = &*out.lrb;
      const std::vector<LaemParams>* layers = &laems_;
      enhance_fn = [active, lrb_bundle, layers](int stage, const TokenGrid& grid) {
        if (!active[static_cast<size_t>(stage)]) return grid;
        return enhance(grid, lrb_bundle->grids[static_cast<size_t>(stage)],
                       (*layers)[static_cast<size_t>(stage)]);
      };
    }
    RuntimeOpts wo = opts;
    wo.dropout_seed = mix_seed(opts.dropout_seed, 1);
    out.wib = forward_branch(whole, cfg_.backbone, *wib_, plans_, wo, enhance_fn);
  }
  const TokenGrid* wg = out.wib ? &out.wib->grids[3] : nullptr;
  const TokenGrid* lg = out.lrb ? &out.lrb->grids[3] : nullptr;
  out.features = fusion_features(wg, lg);
  out.cls_logits = mlp_head_apply(out.features, cls_head_);
  return out;
}

}  // namespace samswin
