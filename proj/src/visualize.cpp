#include "samswin/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "samswin/objective.hpp"

namespace fs = std::filesystem;

namespace samswin {

Json run_segment_report(const DatasetManifest& data, Split split, const SegmenterKind& seg,
                        bool report_iou, int fallback_size, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto indices = data.split_indices(split);
  check(!indices.empty(), std::string("segment: split '") + split_name(split) + "' is empty");

  std::ofstream recs(fs::path(out_dir) / "localizations.jsonl");
  check(recs.good(), "segment: cannot write into " + out_dir);
  int fallbacks = 0;
  double iou_sum = 0.0, dice_sum = 0.0;
  int iou_n = 0;
  for (int idx : indices) {
    ImageSample s = load_sample(data, idx);
    int fb = std::min(fallback_size, s.pixels.h);
    LesionLocalization loc = localize(s, seg, fb);
    if (loc.used_fallback) ++fallbacks;
    Json rec{{"image_id", s.image_id},
             {"label", static_cast<int>(s.label)},
             {"p1", {loc.p1.x, loc.p1.y}},
             {"p2", {loc.p2.x, loc.p2.y}},
             {"used_fallback", loc.used_fallback}};
    if (report_iou) {
      check(s.mask.has_value(), "segment: --report-iou needs ground-truth masks (missing for " +
                                    s.image_id + ")");
      auto [iou, dice] = mask_iou_dice(loc.mask, *s.mask);
      rec["iou"] = iou;
      rec["dice"] = dice;
      iou_sum += iou;
      dice_sum += dice;
      ++iou_n;
    }
    recs << rec.dump() << "\n";
  }
  Json summary{{"split", split_name(split)},
               {"samples", static_cast<int>(indices.size())},
               {"fallbacks", fallbacks}};
  if (report_iou && iou_n > 0) {
    summary["mean_iou"] = iou_sum / iou_n;
    summary["mean_dice"] = dice_sum / iou_n;
  }
  std::ofstream sf(fs::path(out_dir) / "segment_summary.json");
  sf << summary.dump(2) << "\n";
  return summary;
}

GradCamRunStats run_gradcam(const SamSwinModel& model, const DatasetManifest& data, Split split,
                            GradCamTap tap, int max_samples, const SegmenterKind& seg,
                            int fallback_size, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto indices = data.split_indices(split);
  check(!indices.empty(), std::string("gradcam: split '") + split_name(split) + "' is empty");

  std::ofstream recs(fs::path(out_dir) / "gradcam.jsonl");
  GradCamRunStats stats;
  for (int idx : indices) {
    if (max_samples > 0 && stats.emitted >= max_samples) break;
    ImageSample s = load_sample(data, idx);
    int fb = std::min(fallback_size, s.pixels.h);
    LesionLocalization loc = localize(s, seg, fb);
    GradCamResult cam =
        grad_cam(model, s.pixels, loc.lesion_image, static_cast<int>(s.label), tap);
    for (double v : cam.map.v)
      check(std::isfinite(v) && v >= 0.0 && v <= 1.0, "gradcam: map value outside [0,1]");

    Json rec{{"image_id", s.image_id},
             {"label", static_cast<int>(s.label)},
             {"peak", {cam.peak_x, cam.peak_y}},
             {"used_fallback", loc.used_fallback}};
    // Ground-truth box hit test for lesioned samples with oracle masks.
    if (s.mask.has_value()) {
      auto box = extremal_points(*s.mask);
      if (box.has_value()) {
        ++stats.lesioned;
        bool inside = cam.peak_x >= box->first.x && cam.peak_x <= box->second.x &&
                      cam.peak_y >= box->first.y && cam.peak_y <= box->second.y;
        if (inside) ++stats.peak_inside_box;
        rec["gt_box"] = {box->first.x, box->first.y, box->second.x, box->second.y};
        rec["peak_inside_box"] = inside;
      }
    }
    recs << rec.dump() << "\n";
    write_pgm((fs::path(out_dir) / (s.image_id + "_cam.pgm")).string(), cam.map);
    write_ppm((fs::path(out_dir) / (s.image_id + "_overlay.ppm")).string(), cam.overlay);
    ++stats.emitted;
  }
  return stats;
}

Json run_tsne(const SamSwinModel& model, const DatasetManifest& data, Split split,
              const TsneOptions& opt, const SegmenterKind& seg, int fallback_size,
              const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto indices = data.split_indices(split);
  check(!indices.empty(), std::string("tsne: split '") + split_name(split) + "' is empty");

  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  std::vector<std::string> ids;
  {
    NoGradGuard ng;
    for (int idx : indices) {
      ImageSample s = load_sample(data, idx);
      int fb = std::min(fallback_size, s.pixels.h);
      Image lesion;
      if (model.config().with_lrb) lesion = localize(s, seg, fb).lesion_image;
      auto out = model.forward(s.pixels, lesion, RuntimeOpts{});
      feats.push_back(out.features.value());
      labels.push_back(static_cast<int>(s.label));
      ids.push_back(s.image_id);
    }
  }
  auto points = tsne_embed(feats, opt);
  double sil = silhouette_score(points, labels);
  write_ppm((fs::path(out_dir) / "tsne.ppm").string(), render_scatter(points, labels));
  {
    std::ofstream f(fs::path(out_dir) / "tsne_coords.tsv");
    f << "image_id\tlabel\tx\ty\n";
    char line[256];
    for (size_t i = 0; i < points.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s\t%d\t%.17g\t%.17g\n", ids[i].c_str(), labels[i],
                    points[i][0], points[i][1]);
      f << line;
    }
  }
  Json summary{{"split", split_name(split)},
               {"samples", static_cast<int>(points.size())},
               {"silhouette", sil}};
  std::ofstream sf(fs::path(out_dir) / "tsne_summary.json");
  sf << summary.dump(2) << "\n";
  return summary;
}

Json run_attention_dump(const SamSwinModel& model, const DatasetManifest& data, Split split,
                        const std::string& sample_id, int query_index, const SegmenterKind& seg,
                        int fallback_size, const std::string& out_dir) {
  check(model.config().laem_effective(), "attention dump: model has no active LAEM");
  fs::create_directories(out_dir);
  auto indices = data.split_indices(split);
  check(!indices.empty(), std::string("attention: split '") + split_name(split) + "' is empty");

  int chosen = indices[0];
  if (!sample_id.empty()) {
    chosen = -1;
    for (int idx : indices) {
      if (fs::path(data.entries[static_cast<size_t>(idx)].image_path).stem().string() == sample_id)
        chosen = idx;
    }
    check(chosen >= 0, "attention: sample id not found in split: " + sample_id);
  }
  ImageSample s = load_sample(data, chosen);
  int fb = std::min(fallback_size, s.pixels.h);
  LesionLocalization loc = localize(s, seg, fb);

  NoGradGuard ng;
  auto out = model.forward(s.pixels, loc.lesion_image, RuntimeOpts{});
  // Attend from the pre-enhancement stage-4 grids of both branches: the LRB
  // grid supplies queries, the WIB grid keys/values.
  auto active = model.laem_active();
  check(active[3], "attention dump: stage-4 LAEM inactive");
  const TokenGrid& whole = out.wib->grids[3];
  const TokenGrid& lesion = out.lrb->grids[3];
  const LaemParams& lp = model.laem_layers()[3];
  auto maps = dump_attention(whole, lesion, lp);

  const int nl = lesion.grid_h * lesion.grid_w;
  const int nw = whole.grid_h * whole.grid_w;
  int q = query_index >= 0 ? query_index : nl / 2;
  check(q >= 0 && q < nl, "attention: query index out of range");

  Json sidecar{{"image_id", s.image_id},
               {"query", q},
               {"heads", static_cast<int>(maps.size())},
               {"grid", {whole.grid_h, whole.grid_w}}};
  Json weights = Json::array();
  for (size_t h = 0; h < maps.size(); ++h) {
    GrayImage g(whole.grid_h, whole.grid_w);
    double mx = 0.0;
    for (int i = 0; i < nw; ++i) {
      g.v[static_cast<size_t>(i)] = maps[h][static_cast<size_t>(q) * nw + i];
      mx = std::max(mx, g.v[static_cast<size_t>(i)]);
    }
    if (mx > 0)
      for (auto& v : g.v) v /= mx;
    GrayImage up = resize_bilinear(g, s.pixels.h, s.pixels.w);
    write_ppm((fs::path(out_dir) / (s.image_id + "_head" + std::to_string(h) + ".ppm")).string(),
              colorize_heat(up));
    std::vector<double> row(maps[h].begin() + static_cast<int64_t>(q) * nw,
                            maps[h].begin() + static_cast<int64_t>(q + 1) * nw);
    weights.push_back(row);
  }
  sidecar["weights"] = weights;
  std::ofstream sf(fs::path(out_dir) / (s.image_id + "_attention.json"));
  sf << sidecar.dump(2) << "\n";
  return sidecar;
}

}  // namespace samswin
