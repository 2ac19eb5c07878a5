#pragma once

#include <array>
#include <vector>

#include "samswin/image.hpp"

namespace samswin {

struct TsneOptions {
  double perplexity = 15.0;
  int iters = 600;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 100;
  uint64_t seed = 0;
};

// Exact (O(n^2)) stochastic neighbor embedding to 2-D. Deterministic given
// the seed. Requires n >= 3 * perplexity samples.
std::vector<std::array<double, 2>> tsne_embed(const std::vector<std::vector<double>>& features,
                                              const TsneOptions& opt);

// Mean silhouette over all samples (euclidean), labels in 0..k-1.
double silhouette_score(const std::vector<std::array<double, 2>>& points,
                        const std::vector<int>& labels);

// Scatter plot colored by class (0 green, 1 amber, 2 red).
Image render_scatter(const std::vector<std::array<double, 2>>& points,
                     const std::vector<int>& labels, int canvas = 512);

}  // namespace samswin
