#include "samswin/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace samswin {

namespace {

uint8_t to_byte(double v) {
  double c = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& in) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  check(ch != EOF, "pnm: truncated header");
  int v = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + (ch - '0');
    any = true;
    ch = in.get();
  }
  check(any, "pnm: malformed header");
  return v;
}

}  // namespace

int64_t Mask::foreground_count() const {
  int64_t n = 0;
  for (uint8_t b : v)
    if (b) ++n;
  return n;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "cannot open for write: " + path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.w) * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) row[static_cast<size_t>(x) * 3 + c] = to_byte(img.at(y, x, c));
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  check(f.good(), "write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open: " + path);
  char m0 = static_cast<char>(f.get()), m1 = static_cast<char>(f.get());
  check(m0 == 'P' && m1 == '6', "not a binary PPM: " + path);
  int w = read_pnm_int(f);
  int h = read_pnm_int(f);
  int maxv = read_pnm_int(f);
  check(maxv == 255, "ppm: only 8-bit supported: " + path);
  Image img(h, w);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    check(f.gcount() == static_cast<std::streamsize>(row.size()), "ppm: truncated data: " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
  }
  return img;
}

void write_pgm(const std::string& path, const Mask& m) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), "cannot open for write: " + path);
  f << "P5\n" << m.w << " " << m.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(m.v.data()), static_cast<std::streamsize>(m.v.size()));
  check(f.good(), "write failed: " + path);
}

Mask read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), "cannot open: " + path);
  char m0 = static_cast<char>(f.get()), m1 = static_cast<char>(f.get());
  check(m0 == 'P' && m1 == '5', "not a binary PGM: " + path);
  int w = read_pnm_int(f);
  int h = read_pnm_int(f);
  int maxv = read_pnm_int(f);
  check(maxv == 255, "pgm: only 8-bit supported: " + path);
  Mask m(h, w);
  f.read(reinterpret_cast<char*>(m.v.data()), static_cast<std::streamsize>(m.v.size()));
  check(f.gcount() == static_cast<std::streamsize>(m.v.size()), "pgm: truncated data: " + path);
  return m;
}

void write_pgm(const std::string& path, const GrayImage& g) {
  Mask m(g.h, g.w);
  for (size_t i = 0; i < g.v.size(); ++i) m.v[i] = to_byte(g.v[i]);
  write_pgm(path, m);
}

namespace {
struct Lerp {
  int i0, i1;
  double f;
};
Lerp sample_coord(int out_i, int out_n, int in_n) {
  double s = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
  int i0 = static_cast<int>(std::floor(s));
  int i1 = std::min(i0 + 1, in_n - 1);
  return {i0, i1, s - i0};
}
}  // namespace

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  check(src.h > 0 && src.w > 0, "resize: empty source");
  Image dst(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    Lerp ly = sample_coord(y, out_h, src.h);
    for (int x = 0; x < out_w; ++x) {
      Lerp lx = sample_coord(x, out_w, src.w);
      for (int c = 0; c < 3; ++c) {
        double top = src.at(ly.i0, lx.i0, c) * (1 - lx.f) + src.at(ly.i0, lx.i1, c) * lx.f;
        double bot = src.at(ly.i1, lx.i0, c) * (1 - lx.f) + src.at(ly.i1, lx.i1, c) * lx.f;
        dst.at(y, x, c) = top * (1 - ly.f) + bot * ly.f;
      }
    }
  }
  return dst;
}

GrayImage resize_bilinear(const GrayImage& src, int out_h, int out_w) {
  check(src.h > 0 && src.w > 0, "resize: empty source");
  GrayImage dst(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    Lerp ly = sample_coord(y, out_h, src.h);
    for (int x = 0; x < out_w; ++x) {
      Lerp lx = sample_coord(x, out_w, src.w);
      double top = src.at(ly.i0, lx.i0) * (1 - lx.f) + src.at(ly.i0, lx.i1) * lx.f;
      double bot = src.at(ly.i1, lx.i0) * (1 - lx.f) + src.at(ly.i1, lx.i1) * lx.f;
      dst.at(y, x) = top * (1 - ly.f) + bot * ly.f;
    }
  }
  return dst;
}

Image crop(const Image& src, int x0, int y0, int x1, int y1) {
  check(x0 >= 0 && y0 >= 0 && x1 < src.w && y1 < src.h, "crop: out of bounds");
  check(x0 <= x1 && y0 <= y1, "crop: inverted box");
  Image dst(y1 - y0 + 1, x1 - x0 + 1);
  for (int y = 0; y < dst.h; ++y)
    for (int x = 0; x < dst.w; ++x)
      for (int c = 0; c < 3; ++c) dst.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return dst;
}

Image colorize_heat(const GrayImage& g) {
  Image out(g.h, g.w);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      double v = std::clamp(g.at(y, x), 0.0, 1.0);
      // blue (0) -> cyan -> yellow -> red (1)
      double r = std::clamp(1.5 * v - 0.25, 0.0, 1.0);
      double gr = v < 0.5 ? std::clamp(2.0 * v, 0.0, 1.0) : std::clamp(2.0 - 2.0 * v + 0.5, 0.0, 1.0);
      double b = std::clamp(1.0 - 2.0 * v, 0.0, 1.0);
      out.at(y, x, 0) = r;
      out.at(y, x, 1) = gr;
      out.at(y, x, 2) = b;
    }
  return out;
}

Image overlay_heat(const Image& base, const GrayImage& heat, double alpha) {
  check(base.h == heat.h && base.w == heat.w, "overlay: size mismatch");
  Image hc = colorize_heat(heat);
  Image out(base.h, base.w);
  for (size_t i = 0; i < out.px.size(); ++i)
    out.px[i] = (1.0 - alpha) * base.px[i] + alpha * hc.px[i];
  return out;
}

}  // namespace samswin
