#pragma once

#include <string>

#include "samswin/engine.hpp"
#include "samswin/tsne.hpp"

namespace samswin {

// Localization pass over one split: writes localizations.jsonl and, when
// requested, an IoU/Dice report against ground-truth masks. Returns summary.
Json run_segment_report(const DatasetManifest& data, Split split, const SegmenterKind& seg,
                        bool report_iou, int fallback_size, const std::string& out_dir);

struct GradCamRunStats {
  int lesioned = 0;
  int peak_inside_box = 0;
  int emitted = 0;
};

// Grad-CAM over up to max_samples of a split; writes <id>_cam.pgm and
// <id>_overlay.ppm plus gradcam.jsonl records (peak, ground-truth box hit).
GradCamRunStats run_gradcam(const SamSwinModel& model, const DatasetManifest& data, Split split,
                            GradCamTap tap, int max_samples, const SegmenterKind& seg,
                            int fallback_size, const std::string& out_dir);

// Embeds the pooled fusion features of a split; writes tsne.ppm (scatter
// colored by true class) and tsne_coords.tsv. Returns summary with the
// silhouette score.
Json run_tsne(const SamSwinModel& model, const DatasetManifest& data, Split split,
              const TsneOptions& opt, const SegmenterKind& seg, int fallback_size,
              const std::string& out_dir);

// Stage-4 LAEM attention maps for one sample: one raster per head for the
// chosen query token plus a sidecar of raw weights.
Json run_attention_dump(const SamSwinModel& model, const DatasetManifest& data, Split split,
                        const std::string& sample_id, int query_index, const SegmenterKind& seg,
                        int fallback_size, const std::string& out_dir);

}  // namespace samswin
