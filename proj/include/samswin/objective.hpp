#pragma once

#include <array>
#include <optional>

#include "samswin/backbone.hpp"

namespace samswin {

struct LossWeights {
  double alpha = 1e-3;
  bool cag_enabled = false;
};

// Stage-i auxiliary weight, i = 1..4: 2^(i-1) * alpha.
double cag_stage_weight(const LossWeights& w, int stage_1based);

// -log softmax(logits)[label], computed log-sum-exp stably.
Tensor cross_entropy(const Tensor& logits, int label);

struct CagResult {
  Tensor branch_total;
  std::array<Tensor, 4> per_stage;  // weighted terms, sum equals branch_total
};

// Sum over stages of 2^(i-1)*alpha*CE(stage_logits[i], label).
CagResult cag_loss(const std::array<Tensor, 4>& stage_logits, int label, const LossWeights& w);

// Fusion head: mean-pool each final grid, concatenate, one hidden layer MLP.
struct MlpHeadParams {
  LinearParams fc1, fc2;
};
MlpHeadParams make_mlp_head(ParamStore& store, const std::string& prefix, int in_dim, int hidden,
                            int num_classes, Rng& rng);

// Mean-pooled (and, with both branches, concatenated) final-stage features;
// the classification head's input and the t-SNE embedding source.
Tensor fusion_features(const TokenGrid* whole_final, const TokenGrid* lesion_final);
Tensor mlp_head_apply(const Tensor& features, const MlpHeadParams& params);

// Either grid may be null (single-branch variants use the available one).
Tensor classification_head(const TokenGrid* whole_final, const TokenGrid* lesion_final,
                           const MlpHeadParams& params);

// L_total and its constituents; per-stage entries are the weighted terms.
struct LossBreakdown {
  double total = 0, cls = 0, cag_w = 0, cag_l = 0;
  std::array<double, 4> per_stage_w{};
  std::array<double, 4> per_stage_l{};

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator*=(double f);
};

struct TotalLoss {
  Tensor total;  // graph root for backward
  LossBreakdown values;
};

// L_total = L_cls + L_w + L_l. Bundles may be null for single-branch
// variants; with cag disabled the total IS the classification loss.
TotalLoss total_loss(const Tensor& cls_logits, const StageBundle* wib, const StageBundle* lrb,
                     int label, const LossWeights& w);

}  // namespace samswin
