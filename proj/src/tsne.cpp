#include "samswin/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "samswin/rng.hpp"

namespace samswin {

std::vector<std::array<double, 2>> tsne_embed(const std::vector<std::vector<double>>& features,
                                              const TsneOptions& opt) {
  const int n = static_cast<int>(features.size());
  check(n >= static_cast<int>(3.0 * opt.perplexity),
        "tsne: needs at least 3*perplexity samples, got " + std::to_string(n));
  const size_t d = features[0].size();
  for (const auto& f : features) check(f.size() == d, "tsne: ragged feature matrix");

  // Pairwise squared distances.
  std::vector<double> dist2(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < d; ++k) {
        double diff = features[static_cast<size_t>(i)][k] - features[static_cast<size_t>(j)][k];
        s += diff * diff;
      }
      dist2[static_cast<size_t>(i) * n + j] = s;
      dist2[static_cast<size_t>(j) * n + i] = s;
    }

  // Per-point precision via binary search to match log(perplexity) entropy.
  const double target_entropy = std::log(opt.perplexity);
  std::vector<double> P(static_cast<size_t>(n) * n, 0.0);
  std::vector<double> row(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 64; ++it) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        row[static_cast<size_t>(j)] =
            j == i ? 0.0 : std::exp(-dist2[static_cast<size_t>(i) * n + j] * beta);
        sum += row[static_cast<size_t>(j)];
      }
      if (sum <= 0.0) sum = 1e-300;
      double entropy = 0.0;
      for (int j = 0; j < n; ++j) {
        double p = row[static_cast<size_t>(j)] / sum;
        if (p > 1e-12) entropy -= p * std::log(p);
      }
      if (std::fabs(entropy - target_entropy) < 1e-5) break;
      if (entropy > target_entropy) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta + beta_lo);
      }
    }
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      row[static_cast<size_t>(j)] =
          j == i ? 0.0 : std::exp(-dist2[static_cast<size_t>(i) * n + j] * beta);
      sum += row[static_cast<size_t>(j)];
    }
    if (sum <= 0.0) sum = 1e-300;
    for (int j = 0; j < n; ++j) P[static_cast<size_t>(i) * n + j] = row[static_cast<size_t>(j)] / sum;
  }
  // Symmetrize.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double p = (P[static_cast<size_t>(i) * n + j] + P[static_cast<size_t>(j) * n + i]) / (2.0 * n);
      P[static_cast<size_t>(i) * n + j] = std::max(p, 1e-12);
    }

  Rng rng(mix_seed(opt.seed, 0x7453e5ULL));
  std::vector<std::array<double, 2>> y(static_cast<size_t>(n));
  for (auto& p : y) p = {rng.normal(0.0, 1e-4), rng.normal(0.0, 1e-4)};
  std::vector<std::array<double, 2>> vel(static_cast<size_t>(n), {0.0, 0.0});
  std::vector<double> q(static_cast<size_t>(n) * n);

  for (int iter = 0; iter < opt.iters; ++iter) {
    const double exag = iter < opt.exaggeration_iters ? opt.early_exaggeration : 1.0;
    const double momentum = iter < 250 ? 0.5 : 0.8;
    double z = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double dx = y[static_cast<size_t>(i)][0] - y[static_cast<size_t>(j)][0];
        double dy = y[static_cast<size_t>(i)][1] - y[static_cast<size_t>(j)][1];
        double qq = 1.0 / (1.0 + dx * dx + dy * dy);
        q[static_cast<size_t>(i) * n + j] = qq;
        q[static_cast<size_t>(j) * n + i] = qq;
        z += 2.0 * qq;
      }
    z = std::max(z, 1e-12);
    for (int i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        double qq = q[static_cast<size_t>(i) * n + j];
        double coeff = (exag * P[static_cast<size_t>(i) * n + j] - qq / z) * qq;
        gx += coeff * (y[static_cast<size_t>(i)][0] - y[static_cast<size_t>(j)][0]);
        gy += coeff * (y[static_cast<size_t>(i)][1] - y[static_cast<size_t>(j)][1]);
      }
      vel[static_cast<size_t>(i)][0] = momentum * vel[static_cast<size_t>(i)][0] - opt.learning_rate * 4.0 * gx;
      vel[static_cast<size_t>(i)][1] = momentum * vel[static_cast<size_t>(i)][1] - opt.learning_rate * 4.0 * gy;
    }
    double cx = 0.0, cy = 0.0;
    for (int i = 0; i < n; ++i) {
      y[static_cast<size_t>(i)][0] += vel[static_cast<size_t>(i)][0];
      y[static_cast<size_t>(i)][1] += vel[static_cast<size_t>(i)][1];
      cx += y[static_cast<size_t>(i)][0];
      cy += y[static_cast<size_t>(i)][1];
    }
    cx /= n;
    cy /= n;
    for (auto& p : y) {
      p[0] -= cx;
      p[1] -= cy;
    }
  }
  return y;
}

double silhouette_score(const std::vector<std::array<double, 2>>& points,
                        const std::vector<int>& labels) {
  const int n = static_cast<int>(points.size());
  check(static_cast<int>(labels.size()) == n, "silhouette: label count mismatch");
  check(n >= 2, "silhouette: needs >= 2 points");
  int k = 1 + *std::max_element(labels.begin(), labels.end());
  auto dist = [&](int i, int j) {
    double dx = points[static_cast<size_t>(i)][0] - points[static_cast<size_t>(j)][0];
    double dy = points[static_cast<size_t>(i)][1] - points[static_cast<size_t>(j)][1];
    return std::sqrt(dx * dx + dy * dy);
  };
  double total = 0.0;
  int counted = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<size_t>(k), 0.0);
    std::vector<int> cnt(static_cast<size_t>(k), 0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<size_t>(labels[static_cast<size_t>(j)])] += dist(i, j);
      ++cnt[static_cast<size_t>(labels[static_cast<size_t>(j)])];
    }
    int li = labels[static_cast<size_t>(i)];
    if (cnt[static_cast<size_t>(li)] == 0) continue;  // singleton cluster
    double a = sum[static_cast<size_t>(li)] / cnt[static_cast<size_t>(li)];
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == li || cnt[static_cast<size_t>(c)] == 0) continue;
      b = std::min(b, sum[static_cast<size_t>(c)] / cnt[static_cast<size_t>(c)]);
    }
    if (!std::isfinite(b)) continue;
    total += (b - a) / std::max(a, b);
    ++counted;
  }
  check(counted > 0, "silhouette: needs >= 2 non-singleton clusters");
  return total / counted;
}

Image render_scatter(const std::vector<std::array<double, 2>>& points,
                     const std::vector<int>& labels, int canvas) {
  Image img(canvas, canvas);
  for (auto& p : img.px) p = 1.0;
  if (points.empty()) return img;
  double mnx = points[0][0], mxx = points[0][0], mny = points[0][1], mxy = points[0][1];
  for (const auto& p : points) {
    mnx = std::min(mnx, p[0]);
    mxx = std::max(mxx, p[0]);
    mny = std::min(mny, p[1]);
    mxy = std::max(mxy, p[1]);
  }
  double sx = mxx > mnx ? (canvas - 40.0) / (mxx - mnx) : 1.0;
  double sy = mxy > mny ? (canvas - 40.0) / (mxy - mny) : 1.0;
  const double colors[3][3] = {{0.15, 0.65, 0.3}, {0.9, 0.65, 0.1}, {0.85, 0.2, 0.2}};
  for (size_t i = 0; i < points.size(); ++i) {
    int cx = 20 + static_cast<int>((points[i][0] - mnx) * sx);
    int cy = 20 + static_cast<int>((points[i][1] - mny) * sy);
    int cls = std::clamp(labels[i], 0, 2);
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) {
        if (dx * dx + dy * dy > 9) continue;
        int y = cy + dy, x = cx + dx;
        if (y < 0 || y >= canvas || x < 0 || x >= canvas) continue;
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = colors[cls][ch];
      }
  }
  return img;
}

}  // namespace samswin
