#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "samswin/common.hpp"

namespace samswin {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  int param_index = -1;  // >= 0 for registered parameters
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;
};

// Value-semantic handle onto a graph node. Ops build the graph dynamically;
// backward() walks it in reverse topological order. Double precision
// throughout: the gradient checks compare against 1e-4 central differences.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

  static Tensor zeros(const Shape& s);
  static Tensor constant(const Shape& s, double v);
  static Tensor from_data(const Shape& s, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int64_t numel() const { return shape_numel(node_->shape); }

  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& raw_value() { return node_->value; }  // leaves only
  const std::vector<double>& grad() const { return node_->grad; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  int param_index() const { return node_->param_index; }
  void set_param_index(int i) { node_->param_index = i; }
  void zero_grad();

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// When set, gradients of parameter leaves (param_index >= 0) are routed into
// buffers[param_index] instead of the shared node. Needed for thread-safe
// per-sample backward passes against shared parameters.
struct GradSink {
  std::vector<std::vector<double>>* buffers = nullptr;
};

void backward(const Tensor& scalar_root, const GradSink& sink = {});

// Disables graph construction in scope (pure inference / finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

// ---- elementwise / shape ----
Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor add_bias(const Tensor& x, const Tensor& b);      // (n,c) + (c)
Tensor mul_scalar(const Tensor& x, double s);
Tensor scale_by(const Tensor& x, const Tensor& gate);   // gate is a 1-element tensor
Tensor reshape(const Tensor& x, const Shape& s);
Tensor permute(const Tensor& x, const std::vector<int>& dims);
Tensor concat_cols(const Tensor& a, const Tensor& b);   // (n,ca)|(n,cb) -> (n,ca+cb)
Tensor slice_cols(const Tensor& x, int start, int len); // (n,c) -> (n,len)
Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);  // idx -1 = zero row
Tensor mean_rows(const Tensor& x);                      // (n,c) -> (c)
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor dropout(const Tensor& x, double p, uint64_t seed);  // train-mode only

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);  // (B,m,k)x(B,k,n)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);    // x(n,i), w(o,i), b(o)

// ---- normalization / attention pieces ----
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor normalize_rows(const Tensor& x, double eps = 1e-12);  // L2 per row
Tensor softmax_lastdim(const Tensor& x);
// scores(B,t,t) * exp(min(log_scale[b % h], max_log)); for scaled-cosine attention.
Tensor scale_per_head(const Tensor& scores, const Tensor& log_scale, int heads, double max_log);
// scores(B,t,t) += table[rel_idx[i*t+j], b % h]; learned relative position bias.
Tensor add_position_bias(const Tensor& scores, const Tensor& table,
                         std::shared_ptr<const std::vector<int>> rel_idx, int heads);
// scores(B,t,t) += mask[group[b]][i*t+j]; constant additive attention masks.
Tensor add_attn_mask(const Tensor& scores,
                     std::shared_ptr<const std::vector<std::vector<double>>> masks,
                     std::shared_ptr<const std::vector<int>> group);

// Scalar element of a rank-1 tensor (for picking a target logit).
Tensor pick(const Tensor& x, int index);

// ---- losses ----
Tensor cross_entropy_logits(const Tensor& logits, int label);  // scalar, log-sum-exp stable

}  // namespace samswin
