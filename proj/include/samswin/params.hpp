#pragma once

#include <string>
#include <vector>

#include "samswin/rng.hpp"
#include "samswin/tensor.hpp"

namespace samswin {

// Ordered registry of named trainable tensors. Registration order is the
// canonical parameter order used by the optimizer, gradient buffers and
// checkpoints.
class ParamStore {
 public:
  Tensor create(const std::string& name, const Shape& shape);

  int count() const { return static_cast<int>(tensors_.size()); }
  int64_t total_numel() const;
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  const std::string& name(int i) const { return names_[static_cast<size_t>(i)]; }
  Tensor* find(const std::string& name);

  void zero_all_grads();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// In-place init helpers.
void init_trunc_normal(Tensor& t, Rng& rng, double stddev = 0.02);
void init_const(Tensor& t, double v);

}  // namespace samswin
