#pragma once

#include <optional>
#include <string>
#include <vector>

#include "samswin/image.hpp"

namespace samswin {

enum class Label : int { normal = 0, benign = 1, malignant = 2 };
enum class Split : int { train = 0, val = 1, test = 2 };

const char* label_name(Label l);
const char* split_name(Split s);
Split split_from_string(const std::string& s);

// One labeled whole image. H == W, divisible by 32. Normal samples carry an
// all-zero or absent mask; lesioned generator samples have >= 1 foreground px.
struct ImageSample {
  std::string image_id;
  Image pixels;
  Label label = Label::normal;
  std::optional<Mask> mask;
  Split split = Split::train;
};

struct ManifestEntry {
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;   // empty = no mask
  Label label = Label::normal;
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  // 3 names
  int image_size = 0;
  std::string base_dir;  // directory the relative paths resolve against

  std::vector<int> split_indices(Split s) const;  // entry indices, manifest order
};

// Line-delimited manifest: one record per line, tab-separated
// image_path, mask_path (may be empty), label (0/1/2), split (train/val/test).
// Header comment lines carry class names and image size.
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Writes label-correlated synthetic laryngoscopy-style images plus ground
// truth masks under out_dir (images/, masks/) and returns the manifest, also
// saved as out_dir/manifest.tsv. Deterministic given seed.
//   normal    - textured background, all-zero mask
//   benign    - one smooth low-eccentricity bright ellipse
//   malignant - one irregular high-contrast blob with speckle
DatasetManifest generate_synthetic(const std::string& out_dir, int num_per_class, int image_size,
                                   uint64_t seed);

// Per-class stratified train/val shuffle; pre-marked test entries untouched.
DatasetManifest split_manifest(const DatasetManifest& m, double val_fraction, uint64_t seed);

struct LoadOptions {
  bool augment = false;   // photometric-only policy, train split only
  uint64_t seed = 0;
  uint64_t epoch = 0;
};

// Re-applies the photometric train-split augmentation policy in place, keyed
// by (seed, epoch, entry_index). No-op for non-train samples; masks untouched.
void apply_augmentation(ImageSample& s, uint64_t seed, uint64_t epoch, int entry_index);

// Loads one entry by its index into the manifest entry list.
ImageSample load_sample(const DatasetManifest& m, int entry_index,
                        const LoadOptions& opt = {});

// Loads samples by indices into the given split (0 = first entry of that
// split in manifest order). Masks are binarized at threshold 128; pixel
// augmentation never touches masks.
std::vector<ImageSample> load_batch(const DatasetManifest& m, Split split,
                                    const std::vector<int>& indices,
                                    const LoadOptions& opt = {});

}  // namespace samswin
