#include "samswin/locator.hpp"

#include <algorithm>
#include <filesystem>

namespace fs = std::filesystem;

namespace samswin {

SegmenterKind segmenter_from_string(const std::string& s, const std::string& mask_dir) {
  if (s == "oracle") return SegmenterKind::oracle();
  if (s == "precomputed") {
    check(!mask_dir.empty(), "precomputed segmenter requires a mask directory");
    return SegmenterKind::precomputed(mask_dir);
  }
  if (s == "center" || s == "center_fallback_only") return SegmenterKind::center_only();
  throw Error("unknown segmenter kind: " + s);
}

Mask segment(const ImageSample& sample, const SegmenterKind& segmenter) {
  const int h = sample.pixels.h, w = sample.pixels.w;
  switch (segmenter.kind) {
    case SegmenterKind::Kind::oracle: {
      if (!sample.mask.has_value()) {
        // Normal samples may legally omit the mask; it is equivalent to empty.
        check(sample.label == Label::normal,
              "oracle segmenter needs a ground-truth mask for sample " + sample.image_id);
        return Mask(h, w);
      }
      check(sample.mask->h == h && sample.mask->w == w,
            "oracle mask size mismatch for " + sample.image_id);
      return *sample.mask;
    }
    case SegmenterKind::Kind::precomputed: {
      fs::path p = fs::path(segmenter.mask_dir) / (sample.image_id + ".pgm");
      check(fs::exists(p), "missing precomputed mask file: " + p.string());
      Mask m = read_pgm(p.string());
      check(m.h == h && m.w == w, "precomputed mask size mismatch: " + p.string());
      for (auto& v : m.v) v = v >= 128 ? 255 : 0;
      return m;
    }
    case SegmenterKind::Kind::center_fallback_only:
      return Mask(h, w);
  }
  throw Error("unreachable segmenter kind");
}

std::optional<std::pair<Point, Point>> extremal_points(const Mask& mask) {
  int min_x = mask.w, max_x = -1, min_y = mask.h, max_y = -1;
  for (int y = 0; y < mask.h; ++y) {
    const uint8_t* row = mask.v.data() + static_cast<size_t>(y) * mask.w;
    for (int x = 0; x < mask.w; ++x) {
      if (row[x]) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
  }
  if (max_x < 0) return std::nullopt;
  return std::make_pair(Point{min_x, min_y}, Point{max_x, max_y});
}

Image crop_and_upsample(const Image& whole, Point p1, Point p2) {
  check(p1.x >= 0 && p1.y >= 0 && p2.x < whole.w && p2.y < whole.h,
        "crop_and_upsample: box out of bounds");
  check(p1.x <= p2.x && p1.y <= p2.y, "crop_and_upsample: inverted box");
  Image c = crop(whole, p1.x, p1.y, p2.x, p2.y);
  return resize_bilinear(c, whole.h, whole.w);
}

LesionLocalization localize(const ImageSample& sample, const SegmenterKind& segmenter,
                            int fallback_size) {
  const int h = sample.pixels.h, w = sample.pixels.w;
  check(fallback_size > 0 && fallback_size <= h && fallback_size <= w,
        "localize: fallback_size must be in 1.." + std::to_string(std::min(h, w)));
  LesionLocalization loc;
  loc.mask = segment(sample, segmenter);
  auto pts = extremal_points(loc.mask);
  if (pts.has_value()) {
    loc.p1 = pts->first;
    loc.p2 = pts->second;
    loc.used_fallback = false;
  } else {
    // Centered fallback square.
    loc.p1 = {(w - fallback_size) / 2, (h - fallback_size) / 2};
    loc.p2 = {loc.p1.x + fallback_size - 1, loc.p1.y + fallback_size - 1};
    loc.used_fallback = true;
  }
  loc.lesion_image = crop_and_upsample(sample.pixels, loc.p1, loc.p2);
  return loc;
}

std::pair<double, double> mask_iou_dice(const Mask& pred, const Mask& truth) {
  check(pred.h == truth.h && pred.w == truth.w, "mask_iou_dice: size mismatch");
  int64_t np = 0, nt = 0, ni = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    bool p = pred.v[i] != 0, t = truth.v[i] != 0;
    np += p;
    nt += t;
    ni += (p && t);
  }
  if (np == 0 && nt == 0) return {1.0, 1.0};
  int64_t nu = np + nt - ni;
  double iou = static_cast<double>(ni) / static_cast<double>(nu);
  double dice = 2.0 * static_cast<double>(ni) / static_cast<double>(np + nt);
  return {iou, dice};
}

}  // namespace samswin
