#pragma once

#include <vector>

#include "samswin/params.hpp"

namespace samswin {

// Decoupled-weight-decay adaptive-moment optimizer (the AdamW rule).
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // grads[i] pairs with params.tensors()[i]; empty buffers mean zero grad.
  void step(ParamStore& params, const std::vector<std::vector<double>>& grads, double lr,
            double weight_decay);

  int64_t steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Global L2-norm gradient clipping; no-op when max_norm <= 0.
void clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm);

// Linear warm-up from 0 to base_lr over warmup_steps, then cosine decay from
// base_lr to 0 at total_steps.
double lr_at(int64_t step, int64_t total_steps, int64_t warmup_steps, double base_lr);

}  // namespace samswin
