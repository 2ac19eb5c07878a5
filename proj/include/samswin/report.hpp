#pragma once

#include <array>
#include <string>

#include <json.hpp>

#include "samswin/image.hpp"
#include "samswin/locator.hpp"
#include "samswin/model.hpp"

namespace samswin {

using Confusion = std::array<std::array<int64_t, 3>, 3>;  // rows true, cols predicted

struct MetricsReport {
  Confusion confusion{};
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  std::array<double, 3> per_class_recall{};
  int64_t n = 0;
};

// One-vs-rest per class with the 0/0 -> 0 convention; macro metrics are
// unweighted class means; accuracy is trace/n.
MetricsReport compute_metrics(const Confusion& confusion);

nlohmann::json metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);
std::string render_metrics_text(const MetricsReport& r, const std::array<std::string, 3>& classes);

// Heat-shaded 3x3 grid with count digits; the spec's confusion-figure analog.
Image render_confusion_figure(const Confusion& confusion);

// Writes <stem>.json, <stem>.txt and <stem>_confusion.ppm into dir.
void write_metrics_report(const MetricsReport& r, const std::string& dir, const std::string& stem);

// ---------------------------------------------------------------------------
// Grad-CAM
// ---------------------------------------------------------------------------

enum class GradCamTap { wib_stage4, lrb_stage4 };
GradCamTap gradcam_tap_from_string(const std::string& s);

struct GradCamResult {
  GrayImage map;      // H x W, min-max normalized to [0,1] (all-zero if flat)
  Image overlay;      // heat blended onto the tapped branch's input image
  int peak_x = 0;     // argmax, row-major first on ties
  int peak_y = 0;
};

// Gradient of the target-class logit w.r.t. the tapped stage-4 token grid;
// channel weights are the spatial gradient means, the map is the rectified
// weighted channel sum upsampled to image size.
GradCamResult grad_cam(const SamSwinModel& model, const Image& whole, const Image& lesion,
                       int target_class, GradCamTap tap = GradCamTap::wib_stage4);

}  // namespace samswin
