#include "samswin/objective.hpp"

namespace samswin {

double cag_stage_weight(const LossWeights& w, int stage_1based) {
  check(stage_1based >= 1 && stage_1based <= 4, "cag_stage_weight: stage must be 1..4");
  return static_cast<double>(1 << (stage_1based - 1)) * w.alpha;
}

Tensor cross_entropy(const Tensor& logits, int label) {
  return cross_entropy_logits(logits, label);
}

CagResult cag_loss(const std::array<Tensor, 4>& stage_logits, int label, const LossWeights& w) {
  CagResult r;
  for (int i = 0; i < 4; ++i) {
    check(stage_logits[static_cast<size_t>(i)].defined(), "cag_loss: expects exactly 4 stages");
    Tensor ce = cross_entropy(stage_logits[static_cast<size_t>(i)], label);
    r.per_stage[static_cast<size_t>(i)] = mul_scalar(ce, cag_stage_weight(w, i + 1));
  }
  Tensor total = add(r.per_stage[0], r.per_stage[1]);
  total = add(total, r.per_stage[2]);
  total = add(total, r.per_stage[3]);
  r.branch_total = total;
  return r;
}

MlpHeadParams make_mlp_head(ParamStore& store, const std::string& prefix, int in_dim, int hidden,
                            int num_classes, Rng& rng) {
  MlpHeadParams p;
  p.fc1.w = store.create(prefix + ".fc1.w", {hidden, in_dim});
  init_trunc_normal(p.fc1.w, rng);
  p.fc1.b = store.create(prefix + ".fc1.b", {hidden});
  p.fc2.w = store.create(prefix + ".fc2.w", {num_classes, hidden});
  init_trunc_normal(p.fc2.w, rng);
  p.fc2.b = store.create(prefix + ".fc2.b", {num_classes});
  return p;
}

Tensor fusion_features(const TokenGrid* whole_final, const TokenGrid* lesion_final) {
  check(whole_final != nullptr || lesion_final != nullptr,
        "fusion_features: at least one branch required");
  if (whole_final && lesion_final) {
    Tensor pw = reshape(mean_rows(whole_final->tokens), {1, whole_final->channels});
    Tensor pl = reshape(mean_rows(lesion_final->tokens), {1, lesion_final->channels});
    return concat_cols(pw, pl);
  }
  const TokenGrid* g = whole_final ? whole_final : lesion_final;
  return reshape(mean_rows(g->tokens), {1, g->channels});
}

Tensor mlp_head_apply(const Tensor& features, const MlpHeadParams& params) {
  check(features.dim(1) == params.fc1.w.dim(1),
        "classification_head: width mismatch, expected " + std::to_string(params.fc1.w.dim(1)) +
            " got " + std::to_string(features.dim(1)));
  Tensor h = gelu(linear(features, params.fc1.w, params.fc1.b));
  Tensor logits = linear(h, params.fc2.w, params.fc2.b);
  return reshape(logits, {params.fc2.w.dim(0)});
}

Tensor classification_head(const TokenGrid* whole_final, const TokenGrid* lesion_final,
                           const MlpHeadParams& params) {
  return mlp_head_apply(fusion_features(whole_final, lesion_final), params);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  total += o.total;
  cls += o.cls;
  cag_w += o.cag_w;
  cag_l += o.cag_l;
  for (int i = 0; i < 4; ++i) {
    per_stage_w[static_cast<size_t>(i)] += o.per_stage_w[static_cast<size_t>(i)];
    per_stage_l[static_cast<size_t>(i)] += o.per_stage_l[static_cast<size_t>(i)];
  }
  return *this;
}

LossBreakdown& LossBreakdown::operator*=(double f) {
  total *= f;
  cls *= f;
  cag_w *= f;
  cag_l *= f;
  for (int i = 0; i < 4; ++i) {
    per_stage_w[static_cast<size_t>(i)] *= f;
    per_stage_l[static_cast<size_t>(i)] *= f;
  }
  return *this;
}

TotalLoss total_loss(const Tensor& cls_logits, const StageBundle* wib, const StageBundle* lrb,
                     int label, const LossWeights& w) {
  TotalLoss out;
  Tensor cls = cross_entropy(cls_logits, label);
  out.values.cls = cls.item();
  Tensor total = cls;
  if (w.cag_enabled) {
    if (wib) {
      CagResult rw = cag_loss(wib->stage_logits, label, w);
      total = add(total, rw.branch_total);
      out.values.cag_w = rw.branch_total.item();
      for (int i = 0; i < 4; ++i)
        out.values.per_stage_w[static_cast<size_t>(i)] =
            rw.per_stage[static_cast<size_t>(i)].item();
    }
    if (lrb) {
      CagResult rl = cag_loss(lrb->stage_logits, label, w);
      total = add(total, rl.branch_total);
      out.values.cag_l = rl.branch_total.item();
      for (int i = 0; i < 4; ++i)
        out.values.per_stage_l[static_cast<size_t>(i)] =
            rl.per_stage[static_cast<size_t>(i)].item();
    }
  }
  out.total = total;
  out.values.total = total.item();
  return out;
}

}  // namespace samswin
