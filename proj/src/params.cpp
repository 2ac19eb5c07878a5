#include "samswin/params.hpp"

#include <algorithm>

namespace samswin {

Tensor ParamStore::create(const std::string& name, const Shape& shape) {
  for (const auto& n : names_) check(n != name, "duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(shape);
  t.set_requires_grad(true);
  t.set_param_index(static_cast<int>(tensors_.size()));
  names_.push_back(name);
  tensors_.push_back(t);
  return t;
}

int64_t ParamStore::total_numel() const {
  int64_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

Tensor* ParamStore::find(const std::string& name) {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &tensors_[i];
  return nullptr;
}

void ParamStore::zero_all_grads() {
  for (auto& t : tensors_) t.zero_grad();
}

void init_trunc_normal(Tensor& t, Rng& rng, double stddev) {
  for (auto& v : t.raw_value()) v = rng.trunc_normal(stddev);
}

void init_const(Tensor& t, double v) {
  for (auto& x : t.raw_value()) x = v;
}

}  // namespace samswin
