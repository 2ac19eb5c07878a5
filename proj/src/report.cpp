#include "samswin/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace samswin {

MetricsReport compute_metrics(const Confusion& confusion) {
  MetricsReport r;
  r.confusion = confusion;
  int64_t n = 0, trace = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      int64_t c = confusion[static_cast<size_t>(i)][static_cast<size_t>(j)];
      check(c >= 0, "compute_metrics: negative count");
      n += c;
      if (i == j) trace += c;
    }
  check(n >= 1, "compute_metrics: empty confusion matrix");
  r.n = n;
  r.accuracy = static_cast<double>(trace) / static_cast<double>(n);

  double psum = 0, rsum = 0, fsum = 0;
  for (int c = 0; c < 3; ++c) {
    int64_t tp = confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
    int64_t row = 0, col = 0;
    for (int k = 0; k < 3; ++k) {
      row += confusion[static_cast<size_t>(c)][static_cast<size_t>(k)];
      col += confusion[static_cast<size_t>(k)][static_cast<size_t>(c)];
    }
    int64_t fp = col - tp, fn = row - tp;
    double prec = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    double rec = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    r.per_class_recall[static_cast<size_t>(c)] = rec;
    psum += prec;
    rsum += rec;
    fsum += f1;
  }
  r.macro_precision = psum / 3.0;
  r.macro_recall = rsum / 3.0;
  r.macro_f1 = fsum / 3.0;
  return r;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
  return nlohmann::json{{"confusion", r.confusion},
                        {"n", r.n},
                        {"accuracy", r.accuracy},
                        {"macro_precision", r.macro_precision},
                        {"macro_recall", r.macro_recall},
                        {"macro_f1", r.macro_f1},
                        {"per_class_recall", r.per_class_recall}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.confusion = j.at("confusion").get<Confusion>();
  r.n = j.at("n").get<int64_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_precision = j.at("macro_precision").get<double>();
  r.macro_recall = j.at("macro_recall").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.per_class_recall = j.at("per_class_recall").get<std::array<double, 3>>();
  return r;
}

std::string render_metrics_text(const MetricsReport& r,
                                const std::array<std::string, 3>& classes) {
  std::ostringstream os;
  os << "n = " << r.n << "\n";
  char line[160];
  std::snprintf(line, sizeof(line),
                "accuracy %.4f  macro_precision %.4f  macro_recall %.4f  macro_f1 %.4f\n",
                r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1);
  os << line;
  os << "confusion (rows = true, cols = predicted):\n";
  os << "            ";
  for (int j = 0; j < 3; ++j) {
    std::snprintf(line, sizeof(line), " %10s", classes[static_cast<size_t>(j)].c_str());
    os << line;
  }
  os << "\n";
  for (int i = 0; i < 3; ++i) {
    std::snprintf(line, sizeof(line), "%-12s", classes[static_cast<size_t>(i)].c_str());
    os << line;
    for (int j = 0; j < 3; ++j) {
      std::snprintf(line, sizeof(line), " %10lld",
                    static_cast<long long>(r.confusion[static_cast<size_t>(i)][static_cast<size_t>(j)]));
      os << line;
    }
    std::snprintf(line, sizeof(line), "   recall %.4f\n", r.per_class_recall[static_cast<size_t>(i)]);
    os << line;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// confusion figure (5x7 digit glyphs)
// ---------------------------------------------------------------------------

namespace {

const char* kDigits[10] = {
    "01110 10001 10011 10101 11001 10001 01110",  // 0
    "00100 01100 00100 00100 00100 00100 01110",  // 1
    "01110 10001 00001 00010 00100 01000 11111",  // 2
    "11110 00001 00001 01110 00001 00001 11110",  // 3
    "00010 00110 01010 10010 11111 00010 00010",  // 4
    "11111 10000 11110 00001 00001 10001 01110",  // 5
    "00110 01000 10000 11110 10001 10001 01110",  // 6
    "11111 00001 00010 00100 01000 01000 01000",  // 7
    "01110 10001 10001 01110 10001 10001 01110",  // 8
    "01110 10001 10001 01111 00001 00010 01100",  // 9
};

void draw_digit(Image& img, int digit, int top, int left, int scale, double val) {
  const char* p = kDigits[digit];
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 5; ++c) {
      if (p[r * 6 + c] != '1') continue;
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) {
          int y = top + r * scale + dy, x = left + c * scale + dx;
          if (y < 0 || y >= img.h || x < 0 || x >= img.w) continue;
          for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = val;
        }
    }
}

void draw_number(Image& img, int64_t value, int top, int left, int scale, double val) {
  std::string s = std::to_string(value);
  for (size_t i = 0; i < s.size(); ++i)
    draw_digit(img, s[i] - '0', top, left + static_cast<int>(i) * 6 * scale, scale, val);
}

}  // namespace

Image render_confusion_figure(const Confusion& confusion) {
  const int cell = 96, scale = 2;
  Image img(3 * cell, 3 * cell);
  int64_t mx = 1;
  for (const auto& row : confusion)
    for (int64_t v : row) mx = std::max(mx, v);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double frac = static_cast<double>(confusion[static_cast<size_t>(i)][static_cast<size_t>(j)]) /
                    static_cast<double>(mx);
      // white (0) -> deep blue (max)
      double r = 1.0 - 0.85 * frac, g = 1.0 - 0.55 * frac, b = 1.0 - 0.15 * frac;
      for (int y = i * cell; y < (i + 1) * cell; ++y)
        for (int x = j * cell; x < (j + 1) * cell; ++x) {
          img.at(y, x, 0) = r;
          img.at(y, x, 1) = g;
          img.at(y, x, 2) = b;
        }
      double ink = frac > 0.55 ? 1.0 : 0.0;
      draw_number(img, confusion[static_cast<size_t>(i)][static_cast<size_t>(j)], i * cell + 40,
                  j * cell + 16, scale, ink);
    }
  // grid lines
  for (int k = 1; k < 3; ++k)
    for (int t = 0; t < 3 * cell; ++t) {
      for (int ch = 0; ch < 3; ++ch) {
        img.at(k * cell, t, ch) = 0.3;
        img.at(t, k * cell, ch) = 0.3;
      }
    }
  return img;
}

void write_metrics_report(const MetricsReport& r, const std::string& dir,
                          const std::string& stem) {
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / (stem + ".json"));
    check(f.good(), "cannot write metrics json in " + dir);
    f << metrics_to_json(r).dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / (stem + ".txt"));
    f << render_metrics_text(r, {"normal", "benign", "malignant"});
  }
  write_ppm((fs::path(dir) / (stem + "_confusion.ppm")).string(),
            render_confusion_figure(r.confusion));
}

// ---------------------------------------------------------------------------
// Grad-CAM
// ---------------------------------------------------------------------------

GradCamTap gradcam_tap_from_string(const std::string& s) {
  if (s == "wib" || s == "wib_stage4") return GradCamTap::wib_stage4;
  if (s == "lrb" || s == "lrb_stage4") return GradCamTap::lrb_stage4;
  throw Error("unknown grad-cam tap: " + s);
}

GradCamResult grad_cam(const SamSwinModel& model, const Image& whole, const Image& lesion,
                       int target_class, GradCamTap tap) {
  check(target_class >= 0 && target_class < model.config().backbone.num_classes,
        "grad_cam: target class out of range");
  if (tap == GradCamTap::wib_stage4)
    check(model.config().with_wib, "grad_cam: model has no WIB branch");
  else
    check(model.config().with_lrb, "grad_cam: model has no LRB branch");

  RuntimeOpts opts;  // eval mode
  auto out = model.forward(whole, lesion, opts);
  const TokenGrid& grid =
      tap == GradCamTap::wib_stage4 ? out.wib->grids[3] : out.lrb->grids[3];
  Tensor target = pick(out.cls_logits, target_class);
  // Parameter gradients go to a local sink: keeps the shared model nodes
  // untouched so concurrent calls stay safe.
  std::vector<std::vector<double>> discard(static_cast<size_t>(model.params().count()));
  backward(target, GradSink{&discard});

  const auto& act = grid.tokens.value();
  const auto& gr = grid.tokens.grad();
  check(!gr.empty(), "grad_cam: no gradient reached the tapped grid");
  const int n = grid.grid_h * grid.grid_w, c = grid.channels;
  for (double v : gr) check(std::isfinite(v), "grad_cam: non-finite gradients");

  // channel weights: spatial mean of gradients
  std::vector<double> wts(static_cast<size_t>(c), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) wts[static_cast<size_t>(j)] += gr[static_cast<size_t>(i) * c + j];
  for (auto& w : wts) w /= n;

  GrayImage coarse(grid.grid_h, grid.grid_w);
  double mx = 0.0, mn = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += wts[static_cast<size_t>(j)] * act[static_cast<size_t>(i) * c + j];
    double v = std::max(0.0, s);  // rectified
    coarse.v[static_cast<size_t>(i)] = v;
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  if (mx > mn && mx > 0.0) {
    for (auto& v : coarse.v) v = (v - mn) / (mx - mn);
  } else {
    for (auto& v : coarse.v) v = 0.0;  // constant map stays defined, no NaN
  }

  const Image& base = tap == GradCamTap::wib_stage4 ? whole : lesion;
  GradCamResult res;
  res.map = resize_bilinear(coarse, base.h, base.w);
  res.overlay = overlay_heat(base, res.map);
  double best = -1.0;
  for (int y = 0; y < res.map.h; ++y)
    for (int x = 0; x < res.map.w; ++x)
      if (res.map.at(y, x) > best) {
        best = res.map.at(y, x);
        res.peak_x = x;
        res.peak_y = y;
      }
  return res;
}

}  // namespace samswin
