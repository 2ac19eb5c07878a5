#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "samswin/common.hpp"

namespace samswin {

// RGB image, row-major (h, w, 3), values in [0,1].
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> px;

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_ * 3, 0.0) {}

  double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// Binary mask, values in {0, 255}.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> v;

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  int64_t foreground_count() const;
};

// Lossless raster IO. Images are binary PPM (P6), masks/grayscale are PGM (P5).
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Mask& m);
// Reads any 8-bit PGM; values are returned as stored (not yet binarized).
Mask read_pgm(const std::string& path);

// Gray image helpers for heat maps, values in [0,1].
struct GrayImage {
  int h = 0;
  int w = 0;
  std::vector<double> v;
  GrayImage() = default;
  GrayImage(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0) {}
  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};
void write_pgm(const std::string& path, const GrayImage& g);

// Bilinear resize with half-pixel centers (no corner alignment).
Image resize_bilinear(const Image& src, int out_h, int out_w);
GrayImage resize_bilinear(const GrayImage& src, int out_h, int out_w);

// Inclusive-bound crop: rows y0..y1 and columns x0..x1.
Image crop(const Image& src, int x0, int y0, int x1, int y1);

// Simple blue->red heat colormap applied to [0,1] values.
Image colorize_heat(const GrayImage& g);
// overlay = (1-alpha)*base + alpha*heat_color
Image overlay_heat(const Image& base, const GrayImage& heat, double alpha = 0.5);

}  // namespace samswin
