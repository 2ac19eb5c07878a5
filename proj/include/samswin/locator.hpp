#pragma once

#include <optional>
#include <string>
#include <utility>

#include "samswin/image.hpp"
#include "samswin/synthdata.hpp"

namespace samswin {

// The external segmenter behind the lesion-location pipeline. "oracle" passes
// the sample's ground-truth mask through, "precomputed" reads one grayscale
// raster per image named by image_id, "center_fallback_only" always returns an
// empty mask so downstream takes the center-crop fallback.
struct SegmenterKind {
  enum class Kind { oracle, precomputed, center_fallback_only };
  Kind kind = Kind::oracle;
  std::string mask_dir;  // required iff precomputed

  static SegmenterKind oracle() { return {Kind::oracle, ""}; }
  static SegmenterKind precomputed(std::string dir) { return {Kind::precomputed, std::move(dir)}; }
  static SegmenterKind center_only() { return {Kind::center_fallback_only, ""}; }
};

SegmenterKind segmenter_from_string(const std::string& s, const std::string& mask_dir);

struct Point {
  int x = 0;  // column
  int y = 0;  // row
};

struct LesionLocalization {
  Mask mask;
  Point p1;  // (x_min, y_min)
  Point p2;  // (x_max, y_max)
  Image lesion_image;  // cropped box upsampled back to the whole image's size
  bool used_fallback = false;
};

// Returns the {0,255} lesion mask for the sample under the given segmenter.
Mask segment(const ImageSample& sample, const SegmenterKind& segmenter);

// Componentwise extrema over foreground pixels {(x,y) | mask(x,y)=255}:
// p1 = (min x, min y), p2 = (max x, max y). Empty foreground -> nullopt.
std::optional<std::pair<Point, Point>> extremal_points(const Mask& mask);

// Inclusive-bound crop of rows y1..y2, columns x1..x2, bilinearly resized to
// the whole image's size.
Image crop_and_upsample(const Image& whole, Point p1, Point p2);

// Full pipeline: segment -> extremal box -> crop -> upsample, with the
// centered fallback_size x fallback_size crop when the mask is empty.
LesionLocalization localize(const ImageSample& sample, const SegmenterKind& segmenter,
                            int fallback_size = 128);

// IoU and Dice between binary masks; both are 1.0 when both masks are empty.
std::pair<double, double> mask_iou_dice(const Mask& pred, const Mask& truth);

}  // namespace samswin
