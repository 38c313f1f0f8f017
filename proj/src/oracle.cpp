#include "pvg4d/oracle.hpp"

#include "pvg4d/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pvg4d {

namespace {

struct Box {
  int x0, y0, x1, y1;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

Box clip(Box b, int w, int h) {
  return {std::clamp(b.x0, 0, w), std::clamp(b.y0, 0, h), std::clamp(b.x1, 0, w), std::clamp(b.y1, 0, h)};
}

void mark(std::vector<unsigned char>& mask, int w, const Box& b) {
  for (int y = b.y0; y < b.y1; ++y)
    for (int x = b.x0; x < b.x1; ++x) mask[static_cast<size_t>(y) * w + x] = 1;
}

double bilinear(const Image& img, double fx, double fy, int c) {
  fx = std::clamp(fx - 0.5, 0.0, img.width - 1.0);
  fy = std::clamp(fy - 0.5, 0.0, img.height - 1.0);
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double ax = fx - x0, ay = fy - y0;
  return (1 - ay) * ((1 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c)) +
         ay * ((1 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c));
}

Image blur_region(const Image& img, const Box& b, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(2 * r + 1);
  double s = 0;
  for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= s;
  auto tap = [&](const Image& src, int x, int y, int c, bool horizontal) {
    double acc = 0;
    for (int i = -r; i <= r; ++i) {
      const int xx = std::clamp(horizontal ? x + i : x, 0, src.width - 1);
      const int yy = std::clamp(horizontal ? y : y + i, 0, src.height - 1);
      acc += k[i + r] * src.at(xx, yy, c);
    }
    return acc;
  };
  Image tmp = img, out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = b.x0; x < b.x1; ++x)
      for (int c = 0; c < img.channels; ++c) tmp.at(x, y, c) = tap(img, x, y, c, true);
  for (int y = b.y0; y < b.y1; ++y)
    for (int x = b.x0; x < b.x1; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = tap(tmp, x, y, c, false);
  return out;
}

}  // namespace

void OracleConfig::validate() const {
  if (!(hidden_s > 0.0 && hidden_s < 1.0)) throw std::invalid_argument("oracle hidden_s must lie in (0,1)");
  if (pose_jitter_rotation < 0 || pose_jitter_translation < 0 || color_noise_sigma < 0 ||
      mover_warp_px < 0 || mover_blur_sigma < 0)
    throw std::invalid_argument("oracle corruption scales must be >= 0");
}

bool OracleConfig::corrupts() const {
  return pose_jitter_rotation > 0 || pose_jitter_translation > 0 || color_noise_sigma > 0 ||
         !warp_patches.empty() || mover_warp_px > 0 || mover_blur_sigma > 0;
}

OracleConfig oracle_preset(const std::string& name) {
  OracleConfig c;
  c.name = name;
  if (name == "clean") return c;
  if (name == "biased") {
    c.hidden_s = 0.35;
    return c;
  }
  if (name == "streetlike") {
    c.hidden_s = 0.45;
    c.color_noise_sigma = 0.01;
    c.mover_warp_px = 4.0;
    return c;
  }
  throw std::invalid_argument("unknown oracle preset '" + name + "'");
}

Oracle::Oracle(SynthScene truth, Camera intrinsics, OracleConfig cfg)
    : truth_(std::move(truth)), intrinsics_(intrinsics), cfg_(std::move(cfg)) {
  cfg_.validate();
}

Image warp_region(const Image& img, int x0, int y0, int x1, int y1, const Vec2& d) {
  const Box b = clip({x0, y0, x1, y1}, img.width, img.height);
  Image out = img;
  if (b.empty()) return out;
  const double w = x1 - x0, h = y1 - y0;
  for (int y = b.y0; y < b.y1; ++y) {
    const double wy = 0.5 - 0.5 * std::cos(2 * kPi * (y - y0 + 0.5) / h);
    for (int x = b.x0; x < b.x1; ++x) {
      const double wx = 0.5 - 0.5 * std::cos(2 * kPi * (x - x0 + 0.5) / w);
      const double s = wx * wy;
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = bilinear(img, x + 0.5 - s * d.x(), y + 0.5 - s * d.y(), c);
    }
  }
  return out;
}

PseudoFrame Oracle::generate(const PosePair& pair, int bracket_start, int factor,
                             uint64_t salt) const {
  std::seed_seq seq{static_cast<uint32_t>(cfg_.seed), static_cast<uint32_t>(cfg_.seed >> 32),
                    static_cast<uint32_t>(bracket_start), static_cast<uint32_t>(factor),
                    static_cast<uint32_t>(salt), static_cast<uint32_t>(salt >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  const InterpolatedPose ip = interp_pose_at(pair, cfg_.hidden_s);
  Camera cam = intrinsics_;
  cam.pose = ip.pose;
  if (cfg_.pose_jitter_rotation > 0 || cfg_.pose_jitter_translation > 0) {
    const Vec3 w(normal(rng), normal(rng), normal(rng));
    const Vec3 dt(normal(rng), normal(rng), normal(rng));
    const double angle = cfg_.pose_jitter_rotation * w.norm();
    if (angle > 0) cam.pose.rotation = (cam.pose.rotation * Quat::from_axis_angle(w, angle)).normalized();
    cam.pose.translation += cfg_.pose_jitter_translation * dt;
  }

  PseudoFrame out;
  out.bracket_start = bracket_start;
  out.image = render(truth_.model, cam, ip.time).image;
  if (factor > 1) out.image = box_downsample(out.image, factor);
  const int w = out.image.width, h = out.image.height;

  OracleMeta meta;
  meta.hidden_s = cfg_.hidden_s;
  meta.preset = cfg_.name;
  meta.corruption_mask.assign(static_cast<size_t>(w) * h, 0);

  for (const WarpPatch& p : cfg_.warp_patches) {
    const Box b{p.x0 / factor, p.y0 / factor, (p.x1 + factor - 1) / factor, (p.y1 + factor - 1) / factor};
    out.image = warp_region(out.image, b.x0, b.y0, b.x1, b.y1, p.displacement / factor);
    mark(meta.corruption_mask, w, clip(b, w, h));
  }

  if (cfg_.mover_warp_px > 0 || cfg_.mover_blur_sigma > 0) {
    const Camera low = downsampled_camera(cam, factor);
    for (int m = 0; m < truth_.object_count(); ++m) {
      const Image alpha = render(truth_.object_only(m), low, ip.time).alpha_map;
      Box bb{w, h, 0, 0};
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (alpha.at(x, y) >= 0.05) {
            bb.x0 = std::min(bb.x0, x);
            bb.y0 = std::min(bb.y0, y);
            bb.x1 = std::max(bb.x1, x + 1);
            bb.y1 = std::max(bb.y1, y + 1);
          }
      if (bb.empty()) continue;
      const double shift = cfg_.mover_warp_px / factor;
      const int margin = static_cast<int>(std::ceil(shift)) + 1;
      const Box region{bb.x0 - margin, bb.y0 - margin, bb.x1 + margin, bb.y1 + margin};
      if (cfg_.mover_warp_px > 0) {
        const double a = std::uniform_real_distribution<double>(0.0, 2 * kPi)(rng);
        out.image = warp_region(out.image, region.x0, region.y0, region.x1, region.y1,
                                Vec2(shift * std::cos(a), shift * std::sin(a)));
      }
      const Box clipped = clip(region, w, h);
      if (cfg_.mover_blur_sigma > 0)
        out.image = blur_region(out.image, clipped, cfg_.mover_blur_sigma / factor);
      mark(meta.corruption_mask, w, clipped);
    }
  }

  if (cfg_.color_noise_sigma > 0)
    for (double& v : out.image.data) v = std::clamp(v + cfg_.color_noise_sigma * normal(rng), 0.0, 1.0);

  out.meta = std::move(meta);
  return out;
}

std::vector<unsigned char> oracle_error_mask(const PseudoFrame& pseudo) {
  if (!pseudo.meta) throw MissingMeta("pseudo-frame carries no oracle metadata");
  return pseudo.meta->corruption_mask;
}

}  // namespace pvg4d
