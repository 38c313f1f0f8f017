#include "pvg4d/analysis.hpp"

#include "pvg4d/metrics.hpp"
#include "pvg4d/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pvg4d {

std::vector<ObjectError> object_mid_errors(const SynthScene& scene, const Capture& capture,
                                           const SceneModel& model, const std::string& scene_name) {
  if (capture.holdout.empty()) throw std::invalid_argument("flow/error analysis needs held-out mid-frames");
  const int movers = scene.object_count();
  std::vector<ObjectError> rows(movers);
  std::vector<int> frames_with_pixels(movers, 0);
  for (int m = 0; m < movers; ++m) rows[m] = {scene_name, m, 0.0, 0.0};

  for (size_t h = 0; h < capture.holdout.size(); ++h) {
    const CaptureFrame& frame = capture.holdout[h];
    const Camera cam = capture.camera_for(frame.pose);
    const Image img = render(model, cam, frame.time).image;
    const std::vector<ObjectFlow> flows = gt_flow_magnitude(scene, capture, capture.holdout_bracket[h]);
    for (int m = 0; m < movers; ++m) {
      const std::vector<unsigned char> mask = object_mask(scene, m, cam, frame.time);
      double se = 0.0;
      size_t n = 0;
      for (size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < 3; ++c) {
          const double d = img.data[3 * p + c] - frame.image.data[3 * p + c];
          se += d * d;
        }
        ++n;
      }
      rows[m].flow_px += flows[m + 1].mean_flow_px;
      if (n > 0) {
        rows[m].mid_error += se / (3.0 * n);
        ++frames_with_pixels[m];
      }
    }
  }
  for (int m = 0; m < movers; ++m) {
    rows[m].flow_px /= static_cast<double>(capture.holdout.size());
    if (frames_with_pixels[m] > 0) rows[m].mid_error /= frames_with_pixels[m];
  }
  return rows;
}

std::vector<size_t> top_quartile_by_flow(const std::vector<ObjectError>& rows) {
  std::vector<size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return rows[a].flow_px > rows[b].flow_px; });
  const size_t n = std::max<size_t>(1, (rows.size() + 3) / 4);
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double mean_error(const std::vector<ObjectError>& rows, const std::vector<size_t>& subset) {
  if (subset.empty()) return 0.0;
  double s = 0.0;
  for (size_t i : subset) s += rows.at(i).mid_error;
  return s / static_cast<double>(subset.size());
}

FlowErrorSummary summarize_flow_error(const std::vector<ObjectError>& rows) {
  std::vector<double> x, y;
  for (const ObjectError& r : rows) {
    x.push_back(r.flow_px);
    y.push_back(r.mid_error);
  }
  FlowErrorSummary s;
  s.pearson_r = rows.size() >= 2 ? pearson(x, y) : 0.0;
  s.top_quartile_error = mean_error(rows, top_quartile_by_flow(rows));
  return s;
}

Localization uncertainty_localization(const SynthScene& scene, const Capture& capture,
                                      const PosePair& pair, const PseudoFrame& pseudo,
                                      const UncertaintyMap& umap) {
  if (!pseudo.meta) throw std::invalid_argument("uncertainty localization needs oracle metadata");
  const int w = pseudo.image.width, h = pseudo.image.height;
  if (umap.width() != w || umap.height() != h) throw ResolutionMismatch("uncertainty map and pseudo-frame differ in size");
  const int factor = capture.intrinsics.width / w;
  const InterpolatedPose ip = interp_pose_at(pair, pseudo.meta->hidden_s);
  const Camera low = downsampled_camera(capture.camera_for(ip.pose), factor);

  std::vector<unsigned char> inside(static_cast<size_t>(w) * h, 0), footprint(inside.size(), 0);
  for (int m = 0; m < scene.object_count(); ++m) {
    const Image alpha = render(scene.object_only(m), low, ip.time).alpha_map;
    for (size_t p = 0; p < inside.size(); ++p) {
      if (alpha.data[p] >= 0.5) inside[p] = 1;
      if (alpha.data[p] >= 0.05) footprint[p] = 1;
    }
  }
  const std::vector<unsigned char>& corrupted = pseudo.meta->corruption_mask;
  Localization out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y) * w + x;
      if (corrupted[p] && inside[p]) {
        out.corrupted_mover_beta += umap.beta(x, y);
        ++out.corrupted_mover_pixels;
      } else if (!corrupted[p] && !footprint[p]) {
        out.background_beta += umap.beta(x, y);
        ++out.background_pixels;
      }
    }
  if (out.corrupted_mover_pixels) out.corrupted_mover_beta /= static_cast<double>(out.corrupted_mover_pixels);
  if (out.background_pixels) out.background_beta /= static_cast<double>(out.background_pixels);
  return out;
}

Image scatter_plot(const std::vector<std::vector<std::pair<double, double>>>& series, int width, int height) {
  static const Vec3 palette[] = {{0.85, 0.2, 0.1}, {0.1, 0.35, 0.85}, {0.1, 0.6, 0.2}, {0.6, 0.2, 0.7}};
  Image img(width, height, 3);
  std::fill(img.data.begin(), img.data.end(), 1.0);
  const int margin = std::max(4, std::min(width, height) / 12);

  double x0 = 0, x1 = 1e-12, y0 = 0, y1 = 1e-12;
  for (const auto& s : series)
    for (const auto& [x, y] : s) {
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
    }
  x1 *= 1.05;
  y1 *= 1.05;

  auto put = [&](int px, int py, const Vec3& c) {
    if (px < 0 || py < 0 || px >= width || py >= height) return;
    for (int k = 0; k < 3; ++k) img.at(px, py, k) = c[k];
  };
  const Vec3 black(0, 0, 0);
  for (int x = margin; x < width - margin / 2; ++x) put(x, height - margin, black);
  for (int y = margin / 2; y <= height - margin; ++y) put(margin, y, black);

  const double sx = (width - 1.5 * margin) / (x1 - x0), sy = (height - 1.5 * margin) / (y1 - y0);
  const int r = std::max(2, std::min(width, height) / 100);
  for (size_t i = 0; i < series.size(); ++i)
    for (const auto& [x, y] : series[i]) {
      const int cx = margin + static_cast<int>(std::lround((x - x0) * sx));
      const int cy = height - margin - static_cast<int>(std::lround((y - y0) * sy));
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dx * dx + dy * dy <= r * r) put(cx + dx, cy + dy, palette[i % 4]);
    }
  return img;
}

}  // namespace pvg4d
