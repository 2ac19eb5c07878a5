#include "samswin/optim.hpp"

#include <cmath>

namespace samswin {

void AdamW::step(ParamStore& params, const std::vector<std::vector<double>>& grads, double lr,
                 double weight_decay) {
  auto& ts = params.tensors();
  check(grads.size() == ts.size(), "adamw: grad buffer count mismatch");
  if (m_.empty()) {
    m_.resize(ts.size());
    v_.resize(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
      m_[i].assign(static_cast<size_t>(ts[i].numel()), 0.0);
      v_[i].assign(static_cast<size_t>(ts[i].numel()), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < ts.size(); ++i) {
    auto& p = ts[i].raw_value();
    auto& m = m_[i];
    auto& v = v_[i];
    const bool has_g = !grads[i].empty();
    for (size_t j = 0; j < p.size(); ++j) {
      const double g = has_g ? grads[i][j] : 0.0;
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * p[j]);
    }
  }
}

void clip_grad_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g) sq += x * x;
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (auto& g : grads)
    for (double& x : g) x *= scale;
}

double lr_at(int64_t step, int64_t total_steps, int64_t warmup_steps, double base_lr) {
  check(step >= 0 && step < total_steps, "lr_at: step out of range");
  check(warmup_steps >= 0 && warmup_steps < total_steps, "lr_at: warmup must precede the end");
  if (warmup_steps > 0 && step < warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace samswin
