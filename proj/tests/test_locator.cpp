#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "samswin/locator.hpp"
#include "samswin/rng.hpp"

using namespace samswin;
namespace fs = std::filesystem;

namespace {

Mask random_mask(Rng& rng, int h, int w, double density) {
  Mask m(h, w);
  for (auto& v : m.v) v = rng.uniform() < density ? 255 : 0;
  return m;
}

// Independent brute-force oracle: full-pixel double-loop scan.
std::optional<std::pair<Point, Point>> brute_extremal(const Mask& m) {
  bool any = false;
  int mnx = 0, mny = 0, mxx = 0, mxy = 0;
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      if (!m.at(y, x)) continue;
      if (!any) {
        mnx = mxx = x;
        mny = mxy = y;
        any = true;
      } else {
        mnx = std::min(mnx, x);
        mxx = std::max(mxx, x);
        mny = std::min(mny, y);
        mxy = std::max(mxy, y);
      }
    }
  if (!any) return std::nullopt;
  return std::make_pair(Point{mnx, mny}, Point{mxx, mxy});
}

// Independent bilinear reference, written directly from the interpolation
// formula with half-pixel centers.
double bilinear_ref(const Image& src, int oy, int ox, int out_h, int out_w, int c) {
  double fy = (oy + 0.5) * src.h / static_cast<double>(out_h) - 0.5;
  double fx = (ox + 0.5) * src.w / static_cast<double>(out_w) - 0.5;
  fy = std::min(std::max(fy, 0.0), src.h - 1.0);
  fx = std::min(std::max(fx, 0.0), src.w - 1.0);
  int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
  int y1 = std::min(y0 + 1, src.h - 1), x1 = std::min(x0 + 1, src.w - 1);
  double wy = fy - y0, wx = fx - x0;
  return src.at(y0, x0, c) * (1 - wy) * (1 - wx) + src.at(y0, x1, c) * (1 - wy) * wx +
         src.at(y1, x0, c) * wy * (1 - wx) + src.at(y1, x1, c) * wy * wx;
}

ImageSample make_sample(int size, Label label, std::optional<Mask> mask) {
  ImageSample s;
  s.image_id = "t";
  s.pixels = Image(size, size);
  Rng rng(4);
  for (auto& p : s.pixels.px) p = rng.uniform();
  s.label = label;
  s.mask = std::move(mask);
  return s;
}

}  // namespace

TEST_CASE("extremal points: forced two-pixel example") {
  Mask m(8, 10);
  m.at(5, 3) = 255;  // (x=3, y=5)
  m.at(2, 7) = 255;  // (x=7, y=2)
  auto r = extremal_points(m);
  REQUIRE(r.has_value());
  CHECK(r->first.x == 3);
  CHECK(r->first.y == 2);
  CHECK(r->second.x == 7);
  CHECK(r->second.y == 5);
}

TEST_CASE("extremal points: empty mask is absent") {
  CHECK_FALSE(extremal_points(Mask(16, 16)).has_value());
}

TEST_CASE("extremal points: matches brute-force scan on random masks") {
  Rng rng(21);
  for (int rep = 0; rep < 300; ++rep) {
    int h = 1 + static_cast<int>(rng.uniform_int(64));
    int w = 1 + static_cast<int>(rng.uniform_int(64));
    Mask m = random_mask(rng, h, w, rng.uniform());
    auto a = extremal_points(m);
    auto b = brute_extremal(m);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      CHECK(a->first.x == b->first.x);
      CHECK(a->first.y == b->first.y);
      CHECK(a->second.x == b->second.x);
      CHECK(a->second.y == b->second.y);
    }
  }
}

TEST_CASE("box tightness: every side touches a foreground pixel") {
  Rng rng(22);
  for (int rep = 0; rep < 100; ++rep) {
    Mask m = random_mask(rng, 24, 24, 0.05);
    auto r = extremal_points(m);
    if (!r) continue;
    bool left = false, right = false, top = false, bottom = false;
    for (int y = 0; y < m.h; ++y)
      for (int x = 0; x < m.w; ++x) {
        if (!m.at(y, x)) continue;
        CHECK(x >= r->first.x);
        CHECK(x <= r->second.x);
        CHECK(y >= r->first.y);
        CHECK(y <= r->second.y);
        left |= (x == r->first.x);
        right |= (x == r->second.x);
        top |= (y == r->first.y);
        bottom |= (y == r->second.y);
      }
    CHECK(left);
    CHECK(right);
    CHECK(top);
    CHECK(bottom);
  }
}

TEST_CASE("crop_and_upsample: full-frame crop is identity") {
  Rng rng(23);
  Image img(16, 16);
  for (auto& p : img.px) p = rng.uniform();
  Image out = crop_and_upsample(img, {0, 0}, {15, 15});
  for (size_t i = 0; i < img.px.size(); ++i)
    CHECK(std::fabs(out.px[i] - img.px[i]) <= 1e-6);
}

TEST_CASE("crop_and_upsample: constant image stays constant") {
  Image img(32, 32);
  for (auto& p : img.px) p = 0.375;
  Image out = crop_and_upsample(img, {5, 9}, {20, 17});
  for (double p : out.px) CHECK(p == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("crop_and_upsample: 2x2 gradient to 8x8 matches bilinear reference") {
  Image img(8, 8);
  Rng rng(24);
  for (auto& p : img.px) p = rng.uniform();
  // 2x2 crop at rows 3..4, cols 2..3
  Image ref_src = crop(img, 2, 3, 3, 4);
  Image out = crop_and_upsample(img, {2, 3}, {3, 4});
  REQUIRE(out.h == 8);
  REQUIRE(out.w == 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(out.at(y, x, c) ==
              doctest::Approx(bilinear_ref(ref_src, y, x, 8, 8, c)).epsilon(1e-12));
}

TEST_CASE("crop_and_upsample: rejects bad boxes") {
  Image img(16, 16);
  CHECK_THROWS_AS(crop_and_upsample(img, {0, 0}, {16, 3}), Error);
  CHECK_THROWS_AS(crop_and_upsample(img, {5, 5}, {3, 8}), Error);
  CHECK_THROWS_AS(crop_and_upsample(img, {-1, 0}, {3, 3}), Error);
}

TEST_CASE("segment: oracle, center, precomputed") {
  Mask gt(64, 64);
  gt.at(10, 12) = 255;
  ImageSample s = make_sample(64, Label::benign, gt);

  Mask oracle_out = segment(s, SegmenterKind::oracle());
  CHECK(oracle_out.v == gt.v);

  Mask center_out = segment(s, SegmenterKind::center_only());
  CHECK(center_out.foreground_count() == 0);

  // normal sample without a mask: oracle treats it as empty
  ImageSample normal = make_sample(64, Label::normal, std::nullopt);
  CHECK(segment(normal, SegmenterKind::oracle()).foreground_count() == 0);
  // lesioned sample without a mask is a contract violation
  ImageSample bad = make_sample(64, Label::benign, std::nullopt);
  CHECK_THROWS_AS(segment(bad, SegmenterKind::oracle()), Error);

  // precomputed: read by image_id, error when absent (not silent fallback)
  fs::path dir = fs::temp_directory_path() / "samswin_test_seg";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CHECK_THROWS_AS(segment(s, SegmenterKind::precomputed(dir.string())), Error);
  write_pgm((dir / "t.pgm").string(), gt);
  Mask pre = segment(s, SegmenterKind::precomputed(dir.string()));
  CHECK(pre.v == gt.v);
  // size mismatch is an error
  write_pgm((dir / "t.pgm").string(), Mask(32, 32));
  CHECK_THROWS_AS(segment(s, SegmenterKind::precomputed(dir.string())), Error);
}

TEST_CASE("localize: fallback routes to the centered square") {
  ImageSample s = make_sample(256, Label::normal, Mask(256, 256));
  LesionLocalization loc = localize(s, SegmenterKind::oracle(), 128);
  CHECK(loc.used_fallback);
  CHECK(loc.p1.x == 64);
  CHECK(loc.p1.y == 64);
  CHECK(loc.p2.x == 191);
  CHECK(loc.p2.y == 191);
  CHECK(loc.lesion_image.h == 256);
  // lesion image equals the upsampled center crop
  Image expect = crop_and_upsample(s.pixels, {64, 64}, {191, 191});
  CHECK(loc.lesion_image.px == expect.px);
}

TEST_CASE("localize: full-frame mask keeps the whole image") {
  Mask full(64, 64);
  for (auto& v : full.v) v = 255;
  ImageSample s = make_sample(64, Label::malignant, full);
  LesionLocalization loc = localize(s, SegmenterKind::oracle(), 64);
  CHECK_FALSE(loc.used_fallback);
  for (size_t i = 0; i < s.pixels.px.size(); ++i)
    CHECK(std::fabs(loc.lesion_image.px[i] - s.pixels.px[i]) <= 1e-6);
}

TEST_CASE("localize: single foreground pixel upsamples to constant fill") {
  Mask m(64, 64);
  m.at(20, 10) = 255;  // x=10, y=20
  ImageSample s = make_sample(64, Label::benign, m);
  LesionLocalization loc = localize(s, SegmenterKind::oracle(), 64);
  CHECK(loc.p1.x == 10);
  CHECK(loc.p1.y == 20);
  CHECK(loc.p2.x == 10);
  CHECK(loc.p2.y == 20);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(loc.lesion_image.at(y, x, c) == doctest::Approx(s.pixels.at(20, 10, c)));
}

TEST_CASE("localize: never errors on all-zero masks, precondition enforced") {
  Rng rng(31);
  for (int size : {32, 64, 128, 160}) {
    ImageSample s = make_sample(size, Label::normal, Mask(size, size));
    int fb = std::min(128, size);
    LesionLocalization loc = localize(s, SegmenterKind::oracle(), fb);
    CHECK(loc.used_fallback);
    CHECK(loc.p2.x - loc.p1.x + 1 == fb);
  }
  ImageSample small = make_sample(64, Label::normal, Mask(64, 64));
  CHECK_THROWS_AS(localize(small, SegmenterKind::oracle(), 128), Error);
}

TEST_CASE("localize idempotence: cropped tight mask yields the full-frame box") {
  Rng rng(32);
  for (int rep = 0; rep < 50; ++rep) {
    Mask m = random_mask(rng, 40, 40, 0.03);
    auto r = extremal_points(m);
    if (!r) continue;
    Mask cropped(r->second.y - r->first.y + 1, r->second.x - r->first.x + 1);
    for (int y = 0; y < cropped.h; ++y)
      for (int x = 0; x < cropped.w; ++x)
        cropped.at(y, x) = m.at(r->first.y + y, r->first.x + x);
    auto rr = extremal_points(cropped);
    REQUIRE(rr.has_value());
    CHECK(rr->first.x == 0);
    CHECK(rr->first.y == 0);
    CHECK(rr->second.x == cropped.w - 1);
    CHECK(rr->second.y == cropped.h - 1);
  }
}

TEST_CASE("iou/dice: fixed cases") {
  Mask a(8, 8), b(8, 8);
  for (int i = 0; i < 4; ++i) a.v[static_cast<size_t>(i)] = 255;
  auto [iou_same, dice_same] = mask_iou_dice(a, a);
  CHECK(iou_same == 1.0);
  CHECK(dice_same == 1.0);

  for (int i = 10; i < 14; ++i) b.v[static_cast<size_t>(i)] = 255;
  auto [iou_dis, dice_dis] = mask_iou_dice(a, b);
  CHECK(iou_dis == 0.0);
  CHECK(dice_dis == 0.0);

  // |P|=4, |T|=4, |P cap T|=2 -> 2/6 and 4/8
  Mask p(8, 8), t(8, 8);
  for (int i = 0; i < 4; ++i) p.v[static_cast<size_t>(i)] = 255;
  for (int i = 2; i < 6; ++i) t.v[static_cast<size_t>(i)] = 255;
  auto [iou, dice] = mask_iou_dice(p, t);
  CHECK(iou == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(dice == doctest::Approx(0.5).epsilon(1e-12));

  // both empty -> 1.0 by convention
  auto [iou_e, dice_e] = mask_iou_dice(Mask(4, 4), Mask(4, 4));
  CHECK(iou_e == 1.0);
  CHECK(dice_e == 1.0);

  CHECK_THROWS_AS(mask_iou_dice(Mask(4, 4), Mask(8, 8)), Error);
}

TEST_CASE("iou/dice: dice >= iou with equality only at 0 and 1") {
  Rng rng(33);
  for (int rep = 0; rep < 2000; ++rep) {
    int h = 1 + static_cast<int>(rng.uniform_int(24));
    int w = 1 + static_cast<int>(rng.uniform_int(24));
    Mask p = random_mask(rng, h, w, rng.uniform());
    Mask t = random_mask(rng, h, w, rng.uniform());
    auto [iou, dice] = mask_iou_dice(p, t);
    CHECK(dice >= iou);
    if (iou != 0.0 && iou != 1.0) CHECK(dice > iou);
    if (iou == 0.0 || iou == 1.0) CHECK(dice == iou);
  }
}
