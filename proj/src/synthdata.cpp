#include "samswin/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "samswin/rng.hpp"

namespace fs = std::filesystem;

namespace samswin {

const char* label_name(Label l) {
  switch (l) {
    case Label::normal: return "normal";
    case Label::benign: return "benign";
    case Label::malignant: return "malignant";
  }
  return "?";
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error("unknown split: " + s);
}

std::vector<int> DatasetManifest::split_indices(Split s) const {
  std::vector<int> out;
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].split == s) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

void validate_manifest(const DatasetManifest& m, bool check_files) {
  check(m.class_names.size() == 3, "manifest: expected 3 class names");
  check(m.image_size > 0 && m.image_size % 32 == 0,
        "manifest: image_size must be a positive multiple of 32");
  bool seen[3] = {false, false, false};
  bool any_train = false;
  for (const auto& e : m.entries) {
    if (e.split == Split::train) {
      any_train = true;
      seen[static_cast<int>(e.label)] = true;
    }
  }
  if (any_train)
    check(seen[0] && seen[1] && seen[2], "manifest: train split must contain all three classes");
  if (check_files) {
    for (const auto& e : m.entries) {
      fs::path img = fs::path(m.base_dir) / e.image_path;
      check(fs::exists(img), "manifest: missing image file " + img.string());
      if (!e.mask_path.empty()) {
        fs::path mk = fs::path(m.base_dir) / e.mask_path;
        check(fs::exists(mk), "manifest: missing mask file " + mk.string());
      }
    }
  }
}

}  // namespace

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path);
  check(f.good(), "cannot open for write: " + path);
  f << "# samswin-manifest v1\n";
  f << "# classes " << m.class_names[0] << " " << m.class_names[1] << " " << m.class_names[2]
    << "\n";
  f << "# image_size " << m.image_size << "\n";
  for (const auto& e : m.entries) {
    f << e.image_path << "\t" << e.mask_path << "\t" << static_cast<int>(e.label) << "\t"
      << split_name(e.split) << "\n";
  }
  check(f.good(), "write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open manifest: " + path);
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  if (m.base_dir.empty()) m.base_dir = ".";
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "classes") {
        m.class_names.clear();
        std::string c;
        while (hs >> c) m.class_names.push_back(c);
      } else if (key == "image_size") {
        hs >> m.image_size;
      }
      continue;
    }
    // image_path \t mask_path \t label \t split
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    check(cols.size() == 4, "manifest: malformed record: " + line);
    ManifestEntry e;
    e.image_path = cols[0];
    e.mask_path = cols[1];
    int lbl = std::stoi(cols[2]);
    check(lbl >= 0 && lbl <= 2, "manifest: label out of range: " + cols[2]);
    e.label = static_cast<Label>(lbl);
    e.split = split_from_string(cols[3]);
    m.entries.push_back(std::move(e));
  }
  if (m.class_names.empty()) m.class_names = {"normal", "benign", "malignant"};
  validate_manifest(m, /*check_files=*/true);
  return m;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

namespace {

// Tissue-like background: smooth low-frequency color field plus mild grain.
// Identical distribution across classes, so only the lesion is informative;
// the base-color spread is kept well below the lesion contrast so classes
// stay separable under global pooling.
Image make_background(int size, Rng& rng) {
  Image img(size, size);
  double base_r = rng.uniform(0.58, 0.68);
  double base_g = rng.uniform(0.30, 0.38);
  double base_b = rng.uniform(0.32, 0.40);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k)
    waves.push_back({rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(0.0, 2.0 * M_PI),
                     rng.uniform(0.015, 0.04)});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double u = static_cast<double>(x) / size, v = static_cast<double>(y) / size;
      double field = 0.0;
      for (const auto& w : waves)
        field += w.amp * std::sin(2.0 * M_PI * (w.fx * u + w.fy * v) + w.phase);
      double grain = rng.uniform(-0.01, 0.01);
      img.at(y, x, 0) = std::clamp(base_r + field + grain, 0.0, 1.0);
      img.at(y, x, 1) = std::clamp(base_g + 0.6 * field + grain, 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(base_b + 0.5 * field + grain, 0.0, 1.0);
    }
  }
  return img;
}

struct LesionShape {
  double cx, cy;      // center, pixels
  double r0;          // base radius
  double ecc;         // radius ratio along rotated axes
  double theta;       // rotation
  std::vector<double> amp, phase;  // angular perturbation harmonics (k = 2..)
};

// Signed "inside" measure: < 1 inside, >= 1 outside.
double shape_distance(const LesionShape& s, double x, double y) {
  double dx = x - s.cx, dy = y - s.cy;
  double ct = std::cos(s.theta), st = std::sin(s.theta);
  double ax = (dx * ct + dy * st);
  double ay = (-dx * st + dy * ct) * s.ecc;
  double r = std::sqrt(ax * ax + ay * ay);
  double phi = std::atan2(ay, ax);
  double rim = s.r0;
  for (size_t k = 0; k < s.amp.size(); ++k)
    rim *= 1.0 + s.amp[k] * std::sin(static_cast<double>(k + 2) * phi + s.phase[k]);
  return r / std::max(rim, 1.0);
}

void paint_benign(Image& img, Mask& mask, Rng& rng) {
  const int size = img.h;
  LesionShape s;
  s.r0 = rng.uniform(0.15, 0.24) * size;
  s.cx = rng.uniform(0.3, 0.7) * size;
  s.cy = rng.uniform(0.3, 0.7) * size;
  s.ecc = rng.uniform(0.8, 1.25);
  s.theta = rng.uniform(0.0, M_PI);
  // Smooth pale bump with a strong yellow-green hue rotation (hue ratios
  // survive per-token normalization, plain brightness does not) and a crisp
  // specular rim that gives boundary patches a high-contrast signature.
  double bright = rng.uniform(0.35, 0.5);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double d = shape_distance(s, x + 0.5, y + 0.5);
      if (d < 1.0) {
        mask.at(y, x) = 255;
        double fall = 0.3 + 0.7 * 0.5 * (1.0 + std::cos(M_PI * std::min(d, 1.0)));
        double rim = d > 0.78 ? 0.35 : 0.0;
        img.at(y, x, 0) = std::clamp(img.at(y, x, 0) + 0.6 * bright * fall + rim, 0.0, 1.0);
        img.at(y, x, 1) = std::clamp(img.at(y, x, 1) + 1.3 * bright * fall + rim, 0.0, 1.0);
        img.at(y, x, 2) = std::clamp(img.at(y, x, 2) - 0.4 * bright * fall + 0.8 * rim, 0.0, 1.0);
      }
    }
}

void paint_malignant(Image& img, Mask& mask, Rng& rng) {
  const int size = img.h;
  LesionShape s;
  s.r0 = rng.uniform(0.14, 0.22) * size;
  s.cx = rng.uniform(0.32, 0.68) * size;
  s.cy = rng.uniform(0.32, 0.68) * size;
  s.ecc = rng.uniform(0.75, 1.35);
  s.theta = rng.uniform(0.0, M_PI);
  for (int k = 2; k <= 5; ++k) {
    s.amp.push_back(rng.uniform(0.05, 0.12));
    s.phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
  }
  double darken = rng.uniform(0.3, 0.42);
  Rng sp(rng.next_u64());
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double d = shape_distance(s, x + 0.5, y + 0.5);
      if (d < 1.0) {
        mask.at(y, x) = 255;
        // dark irregular core with high-contrast speckle
        double speck = sp.uniform() < 0.4 ? rng.uniform(0.5, 0.75) : 0.0;
        double edge = d > 0.85 ? 0.3 : 0.0;  // bright rim ring
        img.at(y, x, 0) = std::clamp(img.at(y, x, 0) - darken + speck + edge, 0.0, 1.0);
        img.at(y, x, 1) = std::clamp(img.at(y, x, 1) - darken * 1.3 + speck * 0.8 + edge, 0.0, 1.0);
        img.at(y, x, 2) = std::clamp(img.at(y, x, 2) - darken * 0.9 + speck * 0.9 + edge, 0.0, 1.0);
      }
    }
}

}  // namespace

DatasetManifest generate_synthetic(const std::string& out_dir, int num_per_class, int image_size,
                                   uint64_t seed) {
  check(num_per_class >= 1, "generate_synthetic: num_per_class must be >= 1");
  check(image_size > 0 && image_size % 32 == 0,
        "generate_synthetic: image_size must be divisible by 32");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  check(fs::is_directory(fs::path(out_dir) / "images") && fs::is_directory(fs::path(out_dir) / "masks"),
        "generate_synthetic: cannot create output directory " + out_dir);

  DatasetManifest m;
  m.class_names = {"normal", "benign", "malignant"};
  m.image_size = image_size;
  m.base_dir = out_dir;

  for (int idx = 0; idx < num_per_class; ++idx) {
    for (int cls = 0; cls < 3; ++cls) {
      Rng rng(mix_seed(seed, static_cast<uint64_t>(cls), static_cast<uint64_t>(idx)));
      Image img = make_background(image_size, rng);
      Mask mask(image_size, image_size);
      if (cls == 1) paint_benign(img, mask, rng);
      if (cls == 2) paint_malignant(img, mask, rng);

      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d", label_name(static_cast<Label>(cls)), idx);
      std::string img_rel = std::string("images/") + name + ".ppm";
      std::string mask_rel = std::string("masks/") + name + ".pgm";
      write_ppm((fs::path(out_dir) / img_rel).string(), img);
      write_pgm((fs::path(out_dir) / mask_rel).string(), mask);

      ManifestEntry e;
      e.image_path = img_rel;
      e.mask_path = mask_rel;
      e.label = static_cast<Label>(cls);
      e.split = Split::train;
      m.entries.push_back(std::move(e));
    }
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.tsv").string());
  return m;
}

DatasetManifest split_manifest(const DatasetManifest& m, double val_fraction, uint64_t seed) {
  check(val_fraction > 0.0 && val_fraction < 1.0, "split_manifest: val_fraction must be in (0,1)");
  DatasetManifest out = m;
  for (int cls = 0; cls < 3; ++cls) {
    std::vector<int> candidates;
    for (size_t i = 0; i < out.entries.size(); ++i) {
      if (out.entries[i].split == Split::test) continue;  // pre-marked test untouched
      if (static_cast<int>(out.entries[i].label) == cls) candidates.push_back(static_cast<int>(i));
    }
    check(candidates.size() >= 2, std::string("split_manifest: class ") +
                                      label_name(static_cast<Label>(cls)) +
                                      " has fewer than 2 train candidates");
    Rng rng(mix_seed(seed, 0x5117u + static_cast<uint64_t>(cls)));
    rng.shuffle(candidates);
    int n_val = static_cast<int>(std::lround(val_fraction * static_cast<double>(candidates.size())));
    n_val = std::clamp(n_val, 1, static_cast<int>(candidates.size()) - 1);
    for (size_t k = 0; k < candidates.size(); ++k)
      out.entries[static_cast<size_t>(candidates[k])].split =
          (static_cast<int>(k) < n_val) ? Split::val : Split::train;
  }
  validate_manifest(out, /*check_files=*/false);
  return out;
}

// ---------------------------------------------------------------------------
// loading
// ---------------------------------------------------------------------------

namespace {

// Photometric-only policy in the RandAugment style: two randomly chosen ops
// with random magnitudes per sample. Masks are never touched.
void augment_pixels(Image& img, Rng& rng) {
  for (int n = 0; n < 2; ++n) {
    switch (rng.uniform_int(5)) {
      case 0: {  // brightness
        double d = rng.uniform(-0.15, 0.15);
        for (auto& p : img.px) p = std::clamp(p + d, 0.0, 1.0);
        break;
      }
      case 1: {  // contrast
        double f = rng.uniform(0.8, 1.25);
        for (auto& p : img.px) p = std::clamp(0.5 + (p - 0.5) * f, 0.0, 1.0);
        break;
      }
      case 2: {  // gamma
        double g = rng.uniform(0.8, 1.25);
        for (auto& p : img.px) p = std::pow(std::clamp(p, 0.0, 1.0), g);
        break;
      }
      case 3: {  // per-channel scale
        double f[3] = {rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1)};
        for (size_t i = 0; i < img.px.size(); ++i)
          img.px[i] = std::clamp(img.px[i] * f[i % 3], 0.0, 1.0);
        break;
      }
      default: {  // gaussian noise
        double sigma = rng.uniform(0.0, 0.02);
        for (auto& p : img.px) p = std::clamp(p + rng.normal(0.0, sigma), 0.0, 1.0);
        break;
      }
    }
  }
}

}  // namespace

void apply_augmentation(ImageSample& s, uint64_t seed, uint64_t epoch, int entry_index) {
  if (s.split != Split::train) return;
  Rng rng(mix_seed(seed, epoch, 0x4155u + static_cast<uint64_t>(entry_index)));
  augment_pixels(s.pixels, rng);
}

ImageSample load_sample(const DatasetManifest& m, int entry_index, const LoadOptions& opt) {
  check(entry_index >= 0 && entry_index < static_cast<int>(m.entries.size()),
        "load_sample: entry index out of range");
  const ManifestEntry& e = m.entries[static_cast<size_t>(entry_index)];
  ImageSample s;
  s.image_id = fs::path(e.image_path).stem().string();
  s.label = e.label;
  s.split = e.split;
  s.pixels = read_ppm((fs::path(m.base_dir) / e.image_path).string());
  check(s.pixels.h == s.pixels.w, "load_sample: image must be square: " + e.image_path);
  check(s.pixels.h % 32 == 0, "load_sample: image side must be divisible by 32: " + e.image_path);
  if (!e.mask_path.empty()) {
    Mask raw = read_pgm((fs::path(m.base_dir) / e.mask_path).string());
    check(raw.h == s.pixels.h && raw.w == s.pixels.w,
          "load_sample: mask/image size mismatch: " + e.mask_path);
    for (auto& v : raw.v) v = v >= 128 ? 255 : 0;  // binarize, mid-gray ties upward
    s.mask = std::move(raw);
  }
  if (opt.augment) apply_augmentation(s, opt.seed, opt.epoch, entry_index);
  return s;
}

std::vector<ImageSample> load_batch(const DatasetManifest& m, Split split,
                                    const std::vector<int>& indices, const LoadOptions& opt) {
  std::vector<int> entry_of = m.split_indices(split);
  std::vector<ImageSample> out;
  out.reserve(indices.size());
  for (int i : indices) {
    check(i >= 0 && i < static_cast<int>(entry_of.size()),
          "load_batch: index out of range for split " + std::string(split_name(split)));
    out.push_back(load_sample(m, entry_of[static_cast<size_t>(i)], opt));
  }
  return out;
}

}  // namespace samswin
