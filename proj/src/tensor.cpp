#include "samswin/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "samswin/rng.hpp"

namespace samswin {

namespace {

thread_local bool g_grad_enabled = true;
thread_local const GradSink* g_sink = nullptr;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

std::shared_ptr<TensorNode> make_node(Shape shape) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(static_cast<size_t>(shape_numel(n->shape)), 0.0);
  return n;
}

// Gradient accumulation target for a parent node: the shared sink buffer for
// registered parameters when a sink is active, the node's own grad otherwise.
double* grad_buf(TensorNode& p) {
  if (g_sink && g_sink->buffers && p.param_index >= 0) {
    auto& buf = (*g_sink->buffers)[static_cast<size_t>(p.param_index)];
    if (buf.empty()) buf.assign(p.value.size(), 0.0);
    return buf.data();
  }
  if (p.grad.empty()) p.grad.assign(p.value.size(), 0.0);
  return p.grad.data();
}

Tensor finish(std::shared_ptr<TensorNode> out, std::vector<Tensor> parents,
              std::function<void(TensorNode&)> bw) {
  bool need = g_grad_enabled;
  if (need) {
    need = false;
    for (auto& p : parents)
      if (p.node()->requires_grad) need = true;
  }
  if (need) {
    out->requires_grad = true;
    out->parents.reserve(parents.size());
    for (auto& p : parents) out->parents.push_back(p.node());
    out->backward_fn = std::move(bw);
  }
  return Tensor(std::move(out));
}

}  // namespace

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string r = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + ")";
}

Tensor Tensor::zeros(const Shape& s) {
  auto n = std::make_shared<TensorNode>();
  n->shape = s;
  n->value.assign(static_cast<size_t>(shape_numel(s)), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::constant(const Shape& s, double v) {
  auto n = std::make_shared<TensorNode>();
  n->shape = s;
  n->value.assign(static_cast<size_t>(shape_numel(s)), v);
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> data) {
  check(static_cast<int64_t>(data.size()) == shape_numel(s),
        "from_data: size mismatch " + shape_str(s));
  auto n = std::make_shared<TensorNode>();
  n->shape = s;
  n->value = std::move(data);
  return Tensor(std::move(n));
}

double Tensor::item() const {
  check(numel() == 1, "item: tensor is not scalar");
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.clear(); }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& root, const GradSink& sink) {
  check(root.numel() == 1, "backward: root must be scalar");
  check(root.node()->requires_grad, "backward: root does not require grad");

  // Reverse post-order DFS over parent edges = consumers before producers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, i] = stack.back();
    if (i < node->parents.size()) {
      TensorNode* p = node->parents[i++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  g_sink = &sink;
  root.node()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  g_sink = nullptr;
}

// ---------------------------------------------------------------------------
// elementwise / shape
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  auto out = make_node(a.shape());
  const size_t n = out->value.size();
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  for (size_t i = 0; i < n; ++i) out->value[i] = pa[i] + pb[i];
  return finish(std::move(out), {a, b}, [](TensorNode& o) {
    const size_t n = o.value.size();
    for (int k = 0; k < 2; ++k) {
      TensorNode& p = *o.parents[static_cast<size_t>(k)];
      if (!p.requires_grad) continue;
      double* g = grad_buf(p);
      for (size_t i = 0; i < n; ++i) g[i] += o.grad[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  check(x.rank() == 2 && b.rank() == 1 && x.dim(1) == b.dim(0), "add_bias: shape mismatch");
  auto out = make_node(x.shape());
  const int n = x.dim(0), c = x.dim(1);
  const double* px = x.value().data();
  const double* pb = b.value().data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) out->value[static_cast<size_t>(i * c + j)] = px[i * c + j] + pb[j];
  return finish(std::move(out), {x, b}, [n, c](TensorNode& o) {
    TensorNode& px = *o.parents[0];
    TensorNode& pb = *o.parents[1];
    if (px.requires_grad) {
      double* g = grad_buf(px);
      for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pb.requires_grad) {
      double* g = grad_buf(pb);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) g[j] += o.grad[static_cast<size_t>(i * c + j)];
    }
  });
}

Tensor mul_scalar(const Tensor& x, double s) {
  auto out = make_node(x.shape());
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = x.value()[i] * s;
  return finish(std::move(out), {x}, [s](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
  });
}

Tensor scale_by(const Tensor& x, const Tensor& gate) {
  check(gate.numel() == 1, "scale_by: gate must be scalar");
  auto out = make_node(x.shape());
  const double s = gate.value()[0];
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = x.value()[i] * s;
  return finish(std::move(out), {x, gate}, [s](TensorNode& o) {
    TensorNode& px = *o.parents[0];
    TensorNode& pg = *o.parents[1];
    if (px.requires_grad) {
      double* g = grad_buf(px);
      for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
    }
    if (pg.requires_grad) {
      double* g = grad_buf(pg);
      double acc = 0.0;
      for (size_t i = 0; i < o.grad.size(); ++i) acc += o.grad[i] * px.value[i];
      g[0] += acc;
    }
  });
}

Tensor reshape(const Tensor& x, const Shape& s) {
  check(shape_numel(s) == x.numel(),
        "reshape: numel mismatch " + shape_str(x.shape()) + " -> " + shape_str(s));
  auto out = std::make_shared<TensorNode>();
  out->shape = s;
  out->value = x.value();
  return finish(std::move(out), {x}, [](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

namespace {
// Row-major strides.
std::vector<int64_t> strides_of(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i)] = acc;
    acc *= s[static_cast<size_t>(i)];
  }
  return st;
}
}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& dims) {
  const size_t r = static_cast<size_t>(x.rank());
  check(dims.size() == r, "permute: dims rank mismatch");
  Shape os(r);
  for (size_t i = 0; i < r; ++i) os[i] = x.dim(dims[i]);
  auto out = make_node(os);
  auto in_st = strides_of(x.shape());
  auto out_st = strides_of(os);
  const int64_t n = x.numel();
  // Map output linear index -> input linear index.
  auto fill = [in_st, out_st, dims, r, n](const double* src, double* dst, bool accumulate) {
    for (int64_t o = 0; o < n; ++o) {
      int64_t rem = o;
      int64_t iin = 0;
      for (size_t d = 0; d < r; ++d) {
        int64_t q = rem / out_st[d];
        rem -= q * out_st[d];
        iin += q * in_st[static_cast<size_t>(dims[d])];
      }
      if (accumulate)
        dst[iin] += src[o];
      else
        dst[o] = src[iin];
    }
  };
  fill(x.value().data(), out->value.data(), false);
  return finish(std::move(out), {x}, [fill](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    fill(o.grad.data(), grad_buf(p), true);
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0), "concat_cols: shape mismatch");
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  auto out = make_node({n, ca + cb});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + static_cast<size_t>(i) * ca, ca,
                out->value.data() + static_cast<size_t>(i) * (ca + cb));
    std::copy_n(b.value().data() + static_cast<size_t>(i) * cb, cb,
                out->value.data() + static_cast<size_t>(i) * (ca + cb) + ca);
  }
  return finish(std::move(out), {a, b}, [n, ca, cb](TensorNode& o) {
    TensorNode& pa = *o.parents[0];
    TensorNode& pb = *o.parents[1];
    if (pa.requires_grad) {
      double* g = grad_buf(pa);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < ca; ++j)
          g[static_cast<size_t>(i) * ca + j] += o.grad[static_cast<size_t>(i) * (ca + cb) + j];
    }
    if (pb.requires_grad) {
      double* g = grad_buf(pb);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < cb; ++j)
          g[static_cast<size_t>(i) * cb + j] +=
              o.grad[static_cast<size_t>(i) * (ca + cb) + ca + j];
    }
  });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  check(x.rank() == 2 && start >= 0 && len > 0 && start + len <= x.dim(1),
        "slice_cols: out of range");
  const int n = x.dim(0), c = x.dim(1);
  auto out = make_node({n, len});
  for (int i = 0; i < n; ++i)
    std::copy_n(x.value().data() + static_cast<size_t>(i) * c + start, len,
                out->value.data() + static_cast<size_t>(i) * len);
  return finish(std::move(out), {x}, [n, c, start, len](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < len; ++j)
        g[static_cast<size_t>(i) * c + start + j] += o.grad[static_cast<size_t>(i) * len + j];
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  check(x.rank() == 2, "gather_rows: expects (n,c)");
  const int c = x.dim(1), n = x.dim(0);
  const int m = static_cast<int>(idx.size());
  auto out = make_node({m, c});
  for (int i = 0; i < m; ++i) {
    int src = idx[static_cast<size_t>(i)];
    check(src >= -1 && src < n, "gather_rows: index out of range");
    if (src >= 0)
      std::copy_n(x.value().data() + static_cast<size_t>(src) * c, c,
                  out->value.data() + static_cast<size_t>(i) * c);
  }
  auto idx_copy = std::make_shared<std::vector<int>>(idx);
  return finish(std::move(out), {x}, [idx_copy, c, m](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (int i = 0; i < m; ++i) {
      int src = (*idx_copy)[static_cast<size_t>(i)];
      if (src < 0) continue;
      const double* go = o.grad.data() + static_cast<size_t>(i) * c;
      double* gp = g + static_cast<size_t>(src) * c;
      for (int j = 0; j < c; ++j) gp[j] += go[j];
    }
  });
}

Tensor mean_rows(const Tensor& x) {
  check(x.rank() == 2, "mean_rows: expects (n,c)");
  const int n = x.dim(0), c = x.dim(1);
  check(n > 0, "mean_rows: empty");
  auto out = make_node({c});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) out->value[static_cast<size_t>(j)] += x.value()[static_cast<size_t>(i) * c + j];
  for (int j = 0; j < c; ++j) out->value[static_cast<size_t>(j)] /= n;
  return finish(std::move(out), {x}, [n, c](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) g[static_cast<size_t>(i) * c + j] += o.grad[static_cast<size_t>(j)] / n;
  });
}

Tensor relu(const Tensor& x) {
  auto out = make_node(x.shape());
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = std::max(0.0, x.value()[i]);
  return finish(std::move(out), {x}, [](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (size_t i = 0; i < o.grad.size(); ++i)
      if (p.value[i] > 0.0) g[i] += o.grad[i];
  });
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& x) {
  auto out = make_node(x.shape());
  for (size_t i = 0; i < out->value.size(); ++i) {
    double v = x.value()[i];
    out->value[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return finish(std::move(out), {x}, [](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (size_t i = 0; i < o.grad.size(); ++i) {
      double v = p.value[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor dropout(const Tensor& x, double p, uint64_t seed) {
  check(p >= 0.0 && p < 1.0, "dropout: p out of range");
  if (p == 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(x.value().size());
  Rng rng(seed);
  const double scale = 1.0 / (1.0 - p);
  for (auto& m : *mask) m = (rng.uniform() < p) ? 0.0 : scale;
  auto out = make_node(x.shape());
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = x.value()[i] * (*mask)[i];
  return finish(std::move(out), {x}, [mask](TensorNode& o) {
    TensorNode& pn = *o.parents[0];
    if (!pn.requires_grad) return;
    double* g = grad_buf(pn);
    for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// linear algebra (Eigen-backed kernels)
// ---------------------------------------------------------------------------

namespace {
void gemm(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
          double* out, bool accumulate) {
  CMap A(a, ar, ac), B(b, br, bc);
  const int m = ta ? ac : ar;
  const int n = tb ? br : bc;
  MMap O(out, m, n);
  if (!ta && !tb) {
    if (accumulate)
      O.noalias() += A * B;
    else
      O.noalias() = A * B;
  } else if (!ta && tb) {
    if (accumulate)
      O.noalias() += A * B.transpose();
    else
      O.noalias() = A * B.transpose();
  } else if (ta && !tb) {
    if (accumulate)
      O.noalias() += A.transpose() * B;
    else
      O.noalias() = A.transpose() * B;
  } else {
    if (accumulate)
      O.noalias() += A.transpose() * B.transpose();
    else
      O.noalias() = A.transpose() * B.transpose();
  }
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  check(a.rank() == 2 && b.rank() == 2, "matmul: expects 2-D");
  const int m = trans_a ? a.dim(1) : a.dim(0);
  const int k = trans_a ? a.dim(0) : a.dim(1);
  const int kb = trans_b ? b.dim(1) : b.dim(0);
  const int n = trans_b ? b.dim(0) : b.dim(1);
  check(k == kb, "matmul: inner dim mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  auto out = make_node({m, n});
  gemm(a.value().data(), a.dim(0), a.dim(1), trans_a, b.value().data(), b.dim(0), b.dim(1),
       trans_b, out->value.data(), false);
  return finish(std::move(out), {a, b}, [m, n, trans_a, trans_b](TensorNode& o) {
    TensorNode& pa = *o.parents[0];
    TensorNode& pb = *o.parents[1];
    const int ar = pa.shape[0], ac = pa.shape[1];
    const int br = pb.shape[0], bc = pb.shape[1];
    if (pa.requires_grad) {
      double* g = grad_buf(pa);
      // dA = dO . B^T (layouts depend on transposes)
      if (!trans_a)
        gemm(o.grad.data(), m, n, false, pb.value.data(), br, bc, !trans_b, g, true);
      else
        gemm(pb.value.data(), br, bc, trans_b, o.grad.data(), m, n, true, g, true);
    }
    if (pb.requires_grad) {
      double* g = grad_buf(pb);
      if (!trans_b)
        gemm(pa.value.data(), ar, ac, !trans_a, o.grad.data(), m, n, false, g, true);
      else
        gemm(o.grad.data(), m, n, true, pa.value.data(), ar, ac, trans_a, g, true);
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  check(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0), "bmm: expects matching (B,..)");
  const int B = a.dim(0), m = a.dim(1), k = a.dim(2);
  const int n = trans_b ? b.dim(1) : b.dim(2);
  check((trans_b ? b.dim(2) : b.dim(1)) == k, "bmm: inner dim mismatch");
  auto out = make_node({B, m, n});
  const int64_t sa = static_cast<int64_t>(m) * k, sb = static_cast<int64_t>(b.dim(1)) * b.dim(2),
                so = static_cast<int64_t>(m) * n;
  for (int i = 0; i < B; ++i)
    gemm(a.value().data() + i * sa, m, k, false, b.value().data() + i * sb, b.dim(1), b.dim(2),
         trans_b, out->value.data() + i * so, false);
  return finish(std::move(out), {a, b}, [B, m, k, n, sa, sb, so, trans_b](TensorNode& o) {
    TensorNode& pa = *o.parents[0];
    TensorNode& pb = *o.parents[1];
    const int br = pb.shape[1], bc = pb.shape[2];
    if (pa.requires_grad) {
      double* g = grad_buf(pa);
      for (int i = 0; i < B; ++i)
        gemm(o.grad.data() + i * so, m, n, false, pb.value.data() + i * sb, br, bc, !trans_b,
             g + i * sa, true);
    }
    if (pb.requires_grad) {
      double* g = grad_buf(pb);
      for (int i = 0; i < B; ++i) {
        if (!trans_b)
          gemm(pa.value.data() + i * sa, m, k, true, o.grad.data() + i * so, m, n, false,
               g + i * sb, true);
        else
          gemm(o.grad.data() + i * so, m, n, true, pa.value.data() + i * sa, m, k, false,
               g + i * sb, true);
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w, false, true);
  if (b.defined()) y = add_bias(y, b);
  return y;
}

// ---------------------------------------------------------------------------
// normalization / attention pieces
// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check(x.rank() == 2, "layer_norm: expects (n,c)");
  const int n = x.dim(0), c = x.dim(1);
  check(gamma.numel() == c && beta.numel() == c, "layer_norm: affine size mismatch");
  auto out = make_node(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * c);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* row = x.value().data() + static_cast<size_t>(i) * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= c;
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(i)] = is;
    for (int j = 0; j < c; ++j) {
      double xh = (row[j] - mean) * is;
      (*xhat)[static_cast<size_t>(i) * c + j] = xh;
      out->value[static_cast<size_t>(i) * c + j] = xh * gamma.value()[static_cast<size_t>(j)] + beta.value()[static_cast<size_t>(j)];
    }
  }
  return finish(std::move(out), {x, gamma, beta}, [n, c, xhat, inv_std](TensorNode& o) {
    TensorNode& px = *o.parents[0];
    TensorNode& pg = *o.parents[1];
    TensorNode& pb = *o.parents[2];
    if (pg.requires_grad) {
      double* g = grad_buf(pg);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
          g[j] += o.grad[static_cast<size_t>(i) * c + j] * (*xhat)[static_cast<size_t>(i) * c + j];
    }
    if (pb.requires_grad) {
      double* g = grad_buf(pb);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) g[j] += o.grad[static_cast<size_t>(i) * c + j];
    }
    if (px.requires_grad) {
      double* g = grad_buf(px);
      const double* gamma = pg.value.data();
      for (int i = 0; i < n; ++i) {
        const double* go = o.grad.data() + static_cast<size_t>(i) * c;
        const double* xh = xhat->data() + static_cast<size_t>(i) * c;
        double sum_gy = 0.0, sum_gyx = 0.0;
        for (int j = 0; j < c; ++j) {
          double gy = go[j] * gamma[j];
          sum_gy += gy;
          sum_gyx += gy * xh[j];
        }
        const double is = (*inv_std)[static_cast<size_t>(i)];
        for (int j = 0; j < c; ++j) {
          double gy = go[j] * gamma[j];
          g[static_cast<size_t>(i) * c + j] += is * (gy - sum_gy / c - xh[j] * sum_gyx / c);
        }
      }
    }
  });
}

Tensor normalize_rows(const Tensor& x, double eps) {
  check(x.rank() == 2, "normalize_rows: expects (n,c)");
  const int n = x.dim(0), c = x.dim(1);
  auto out = make_node(x.shape());
  auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* row = x.value().data() + static_cast<size_t>(i) * c;
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += row[j] * row[j];
    double nr = std::max(std::sqrt(s), eps);
    (*norms)[static_cast<size_t>(i)] = nr;
    for (int j = 0; j < c; ++j) out->value[static_cast<size_t>(i) * c + j] = row[j] / nr;
  }
  return finish(std::move(out), {x}, [n, c, norms](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (int i = 0; i < n; ++i) {
      const double nr = (*norms)[static_cast<size_t>(i)];
      const double* go = o.grad.data() + static_cast<size_t>(i) * c;
      const double* xv = p.value.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += go[j] * xv[j];
      for (int j = 0; j < c; ++j)
        g[static_cast<size_t>(i) * c + j] += go[j] / nr - xv[j] * dot / (nr * nr * nr);
    }
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  const int t = x.dim(x.rank() - 1);
  const int64_t rows = x.numel() / t;
  auto out = make_node(x.shape());
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x.value().data() + i * t;
    double* orow = out->value.data() + i * t;
    double mx = row[0];
    for (int j = 1; j < t; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < t; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < t; ++j) orow[j] /= sum;
  }
  return finish(std::move(out), {x}, [t, rows](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (int64_t i = 0; i < rows; ++i) {
      const double* y = o.value.data() + i * t;
      const double* go = o.grad.data() + i * t;
      double dot = 0.0;
      for (int j = 0; j < t; ++j) dot += go[j] * y[j];
      for (int j = 0; j < t; ++j) g[i * t + j] += y[j] * (go[j] - dot);
    }
  });
}

Tensor scale_per_head(const Tensor& scores, const Tensor& log_scale, int heads, double max_log) {
  check(scores.rank() == 3, "scale_per_head: expects (B,t,t)");
  check(log_scale.numel() == heads, "scale_per_head: log_scale size");
  const int B = scores.dim(0);
  const int64_t plane = static_cast<int64_t>(scores.dim(1)) * scores.dim(2);
  auto out = make_node(scores.shape());
  std::vector<double> tau(static_cast<size_t>(heads)), active(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    double ls = log_scale.value()[static_cast<size_t>(h)];
    active[static_cast<size_t>(h)] = ls < max_log ? 1.0 : 0.0;
    tau[static_cast<size_t>(h)] = std::exp(std::min(ls, max_log));
  }
  for (int b = 0; b < B; ++b) {
    const double s = tau[static_cast<size_t>(b % heads)];
    const double* src = scores.value().data() + b * plane;
    double* dst = out->value.data() + b * plane;
    for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * s;
  }
  auto tau_s = std::make_shared<std::vector<double>>(std::move(tau));
  auto act_s = std::make_shared<std::vector<double>>(std::move(active));
  return finish(std::move(out), {scores, log_scale}, [B, plane, heads, tau_s, act_s](TensorNode& o) {
    TensorNode& ps = *o.parents[0];
    TensorNode& pl = *o.parents[1];
    if (ps.requires_grad) {
      double* g = grad_buf(ps);
      for (int b = 0; b < B; ++b) {
        const double s = (*tau_s)[static_cast<size_t>(b % heads)];
        for (int64_t i = 0; i < plane; ++i) g[b * plane + i] += o.grad[b * plane + i] * s;
      }
    }
    if (pl.requires_grad) {
      double* g = grad_buf(pl);
      for (int b = 0; b < B; ++b) {
        const int h = b % heads;
        if ((*act_s)[static_cast<size_t>(h)] == 0.0) continue;
        double acc = 0.0;
        for (int64_t i = 0; i < plane; ++i) acc += o.grad[b * plane + i] * ps.value[b * plane + i];
        // d(scores*exp(ls))/d(ls) = scores*exp(ls)
        g[h] += acc * (*tau_s)[static_cast<size_t>(h)];
      }
    }
  });
}

Tensor add_position_bias(const Tensor& scores, const Tensor& table,
                         std::shared_ptr<const std::vector<int>> rel_idx, int heads) {
  check(scores.rank() == 3, "add_position_bias: expects (B,t,t)");
  const int B = scores.dim(0);
  const int64_t plane = static_cast<int64_t>(scores.dim(1)) * scores.dim(2);
  check(static_cast<int64_t>(rel_idx->size()) == plane, "add_position_bias: index size");
  auto out = make_node(scores.shape());
  const double* tb = table.value().data();
  for (int b = 0; b < B; ++b) {
    const int h = b % heads;
    const double* src = scores.value().data() + b * plane;
    double* dst = out->value.data() + b * plane;
    for (int64_t i = 0; i < plane; ++i)
      dst[i] = src[i] + tb[static_cast<size_t>((*rel_idx)[static_cast<size_t>(i)]) * heads + h];
  }
  return finish(std::move(out), {scores, table}, [B, plane, heads, rel_idx](TensorNode& o) {
    TensorNode& ps = *o.parents[0];
    TensorNode& pt = *o.parents[1];
    if (ps.requires_grad) {
      double* g = grad_buf(ps);
      for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (pt.requires_grad) {
      double* g = grad_buf(pt);
      for (int b = 0; b < B; ++b) {
        const int h = b % heads;
        for (int64_t i = 0; i < plane; ++i)
          g[static_cast<size_t>((*rel_idx)[static_cast<size_t>(i)]) * heads + h] +=
              o.grad[b * plane + i];
      }
    }
  });
}

Tensor add_attn_mask(const Tensor& scores,
                     std::shared_ptr<const std::vector<std::vector<double>>> masks,
                     std::shared_ptr<const std::vector<int>> group) {
  check(scores.rank() == 3, "add_attn_mask: expects (B,t,t)");
  const int B = scores.dim(0);
  const int64_t plane = static_cast<int64_t>(scores.dim(1)) * scores.dim(2);
  check(static_cast<int>(group->size()) == B, "add_attn_mask: group size");
  auto out = make_node(scores.shape());
  for (int b = 0; b < B; ++b) {
    const auto& m = (*masks)[static_cast<size_t>((*group)[static_cast<size_t>(b)])];
    check(static_cast<int64_t>(m.size()) == plane, "add_attn_mask: mask size");
    const double* src = scores.value().data() + b * plane;
    double* dst = out->value.data() + b * plane;
    for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] + m[static_cast<size_t>(i)];
  }
  return finish(std::move(out), {scores}, [](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor pick(const Tensor& x, int index) {
  check(x.rank() == 1 && index >= 0 && index < x.dim(0), "pick: index out of range");
  auto out = make_node({1});
  out->value[0] = x.value()[static_cast<size_t>(index)];
  return finish(std::move(out), {x}, [index](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    grad_buf(p)[index] += o.grad[0];
  });
}

Tensor cross_entropy_logits(const Tensor& logits, int label) {
  check(logits.rank() == 1, "cross_entropy_logits: expects (c)");
  const int c = logits.dim(0);
  check(label >= 0 && label < c, "cross_entropy_logits: label out of range");
  const double* z = logits.value().data();
  double mx = z[0];
  for (int j = 1; j < c; ++j) mx = std::max(mx, z[j]);
  double sum = 0.0;
  for (int j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
  const double lse = mx + std::log(sum);
  auto out = make_node({1});
  out->value[0] = lse - z[label];
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  for (int j = 0; j < c; ++j) (*probs)[static_cast<size_t>(j)] = std::exp(z[j] - lse);
  return finish(std::move(out), {logits}, [probs, label, c](TensorNode& o) {
    TensorNode& p = *o.parents[0];
    if (!p.requires_grad) return;
    double* g = grad_buf(p);
    const double go = o.grad[0];
    for (int j = 0; j < c; ++j)
      g[j] += go * ((*probs)[static_cast<size_t>(j)] - (j == label ? 1.0 : 0.0));
  });
}

}  // namespace samswin
