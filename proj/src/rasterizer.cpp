#include "pvg4d/rasterizer.hpp"

#include "pvg4d/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace pvg4d {

GaussianGrad& GaussianGrad::operator+=(const GaussianGrad& o) {
  mu += o.mu;
  rot += o.rot;
  log_scale += o.log_scale;
  opacity_logit += o.opacity_logit;
  color += o.color;
  velocity += o.velocity;
  tau += o.tau;
  log_beta += o.log_beta;
  return *this;
}

GaussianGrad& GaussianGrad::operator*=(double s) {
  mu *= s;
  rot *= s;
  log_scale *= s;
  opacity_logit *= s;
  color *= s;
  velocity *= s;
  tau *= s;
  log_beta *= s;
  return *this;
}

bool GaussianGrad::finite() const {
  return mu.allFinite() && rot.allFinite() && log_scale.allFinite() &&
         std::isfinite(opacity_logit) && color.allFinite() && velocity.allFinite() &&
         std::isfinite(tau) && std::isfinite(log_beta);
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& o) {
  if (gaussians.size() < o.gaussians.size()) gaussians.resize(o.gaussians.size());
  for (size_t i = 0; i < o.gaussians.size(); ++i) gaussians[i] += o.gaussians[i];
  cam_rotation += o.cam_rotation;
  cam_translation += o.cam_translation;
  time += o.time;
  return *this;
}

bool GradientBuffer::finite() const {
  return std::all_of(gaussians.begin(), gaussians.end(),
                     [](const GaussianGrad& g) { return g.finite(); }) &&
         cam_rotation.allFinite() && cam_translation.allFinite() && std::isfinite(time);
}

namespace {

// Everything the adjoint needs about one projected primitive.
struct Projected {
  Splat2D splat;
  Vec3 mu_t;
  Vec3 p_cam;
  Mat23 jac;
  Mat3 rot_g;
  Vec3 scale;
  Mat3 sigma;
  Mat3 sigma_view;  // W Sigma W^T
  double opacity_t = 0.0;
  bool alpha_clamped = false;
  // pixel bounding box, inclusive
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

struct Projection {
  std::vector<Projected> items;  // depth order
  Mat3 view_rot;
};

Projection project_all(const SceneModel& scene, const Camera& cam, double t) {
  Projection out;
  out.view_rot = cam.pose.view_rotation();
  const Mat3& w = out.view_rot;
  const double l = scene.cycle_length;

  for (size_t i = 0; i < scene.gaussians.size(); ++i) {
    const PVGaussian& g = scene.gaussians[i];
    const double opacity_t = opacity_at(g, t);
    const double peak = std::min(kMaxAlpha, opacity_t);
    if (!(peak >= kMinAlpha)) continue;

    Projected p;
    p.mu_t = position_at(g, t, l);
    p.p_cam = w * (p.mu_t - cam.pose.translation);
    if (!(p.p_cam.z() > kNearPlane)) continue;

    p.jac = projection_jacobian(cam, p.p_cam);
    p.rot_g = to_rotation(g.rot);
    p.scale = g.log_scale.array().exp();
    p.sigma = build_covariance(g.log_scale, g.rot);
    p.sigma_view = symmetrized(Mat3(w * p.sigma * w.transpose()));
    const Mat2 cov = project_covariance(p.sigma, w, p.jac);
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0)) continue;

    p.opacity_t = opacity_t;
    p.alpha_clamped = opacity_t > kMaxAlpha;
    p.splat.center = project(cam, p.p_cam);
    p.splat.inv_cov << cov(1, 1) / det, -cov(0, 1) / det, -cov(0, 1) / det, cov(0, 0) / det;
    p.splat.depth = p.p_cam.z();
    p.splat.color = g.color;
    p.splat.peak_alpha = peak;
    p.splat.index = static_cast<int>(i);

    // Conservative pixel bounds of the alpha >= kMinAlpha ellipse; the
    // per-pixel alpha test stays authoritative.
    const double q_max = 2.0 * std::log(peak / kMinAlpha);
    const double rx = std::sqrt(std::max(0.0, q_max * cov(0, 0))) + 1.0;
    const double ry = std::sqrt(std::max(0.0, q_max * cov(1, 1))) + 1.0;
    const Vec2& c = p.splat.center;
    if (!std::isfinite(c.x()) || !std::isfinite(c.y())) continue;
    p.x0 = std::max(0, static_cast<int>(std::floor(c.x() - rx - 0.5)));
    p.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(c.x() + rx - 0.5)));
    p.y0 = std::max(0, static_cast<int>(std::floor(c.y() - ry - 0.5)));
    p.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(c.y() + ry - 0.5)));
    if (c.x() - rx > cam.width + 1.0 || c.x() + rx < -1.0 || c.y() - ry > cam.height + 1.0 ||
        c.y() + ry < -1.0)
      continue;
    if (p.x0 > p.x1 || p.y0 > p.y1) continue;
    out.items.push_back(p);
  }

  std::stable_sort(out.items.begin(), out.items.end(), [](const Projected& a, const Projected& b) {
    return a.splat.depth < b.splat.depth;
  });
  return out;
}

struct Tiling {
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> lists;  // per tile, indices into Projection::items in depth order
};

Tiling bin_tiles(const Projection& proj, const Camera& cam) {
  Tiling t;
  t.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
  t.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
  t.lists.resize(static_cast<size_t>(t.tiles_x) * t.tiles_y);
  for (size_t k = 0; k < proj.items.size(); ++k) {
    const Projected& p = proj.items[k];
    for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty)
      for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx)
        t.lists[static_cast<size_t>(ty) * t.tiles_x + tx].push_back(static_cast<int>(k));
  }
  return t;
}

inline bool covers(const Projected& p, int x, int y) {
  return x >= p.x0 && x <= p.x1 && y >= p.y0 && y <= p.y1;
}

// Alpha of a splat at pixel center (x + 0.5, y + 0.5); zero when skipped.
inline double splat_alpha(const Splat2D& s, int x, int y, double& gauss, double& dx, double& dy) {
  dx = (x + 0.5) - s.center.x();
  dy = (y + 0.5) - s.center.y();
  const Mat2& k = s.inv_cov;
  const double power = -0.5 * (k(0, 0) * dx * dx + 2.0 * k(0, 1) * dx * dy + k(1, 1) * dy * dy);
  if (power > 0.0) return 0.0;
  gauss = std::exp(power);
  const double alpha = s.peak_alpha * gauss;
  return alpha < kMinAlpha ? 0.0 : alpha;
}

void check_factor(const Camera& cam, int factor) {
  static constexpr std::array<int, 5> allowed{1, 2, 4, 8, 16};
  if (std::find(allowed.begin(), allowed.end(), factor) == allowed.end())
    throw ResolutionMismatch("downsample factor must be one of 1, 2, 4, 8, 16; got " +
                             std::to_string(factor));
  if (cam.width % factor != 0 || cam.height % factor != 0)
    throw ResolutionMismatch("image " + std::to_string(cam.width) + "x" +
                             std::to_string(cam.height) + " not divisible by " +
                             std::to_string(factor));
}

// Per-tile adjoint accumulators for the screen-space quantities of each
// splat in the tile list: center (2), conic (a, b, c), peak alpha, color (3).
struct ScreenGrad {
  double center_x = 0, center_y = 0;
  double conic_a = 0, conic_b = 0, conic_c = 0;
  double peak_alpha = 0;
  Vec3 color = Vec3::Zero();

  ScreenGrad& operator+=(const ScreenGrad& o) {
    center_x += o.center_x;
    center_y += o.center_y;
    conic_a += o.conic_a;
    conic_b += o.conic_b;
    conic_c += o.conic_c;
    peak_alpha += o.peak_alpha;
    color += o.color;
    return *this;
  }
};

}  // namespace

std::vector<Splat2D> project_splats(const SceneModel& scene, const Camera& cam, double t) {
  const Projection proj = project_all(scene, cam, t);
  std::vector<Splat2D> out;
  out.reserve(proj.items.size());
  for (const auto& p : proj.items) out.push_back(p.splat);
  return out;
}

RenderOutput render(const SceneModel& scene, const Camera& cam, double t) {
  cam.validate();
  const Projection proj = project_all(scene, cam, t);
  const Tiling tiling = bin_tiles(proj, cam);

  RenderOutput out;
  out.image = Image(cam.width, cam.height, 3);
  out.depth_map = Image(cam.width, cam.height, 1);
  out.alpha_map = Image(cam.width, cam.height, 1);

  parallel_for(tiling.lists.size(), [&](size_t tile) {
    const int tx = static_cast<int>(tile) % tiling.tiles_x;
    const int ty = static_cast<int>(tile) / tiling.tiles_x;
    const auto& list = tiling.lists[tile];
    for (int y = ty * kTileSize; y < std::min(cam.height, (ty + 1) * kTileSize); ++y) {
      for (int x = tx * kTileSize; x < std::min(cam.width, (tx + 1) * kTileSize); ++x) {
        double trans = 1.0;
        Vec3 color = Vec3::Zero();
        double depth = 0.0;
        for (int k : list) {
          const Projected& p = proj.items[k];
          if (!covers(p, x, y)) continue;
          double gauss, dx, dy;
          const double alpha = splat_alpha(p.splat, x, y, gauss, dx, dy);
          if (alpha == 0.0) continue;
          const double w = alpha * trans;
          color += w * p.splat.color;
          depth += w * p.splat.depth;
          trans *= 1.0 - alpha;
        }
        const double acc = 1.0 - trans;
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = color[c] + trans * scene.background[c];
        out.alpha_map.at(x, y) = acc;
        out.depth_map.at(x, y) = acc > 0.0 ? depth / acc : 0.0;
      }
    }
  });
  return out;
}

GradientBuffer render_backward(const SceneModel& scene, const Camera& cam, double t,
                               const Image& grad_image) {
  cam.validate();
  if (grad_image.width != cam.width || grad_image.height != cam.height || grad_image.channels != 3)
    throw ResolutionMismatch("render_backward: gradient image does not match the camera");

  const Projection proj = project_all(scene, cam, t);
  const Tiling tiling = bin_tiles(proj, cam);
  const Vec3 bg = scene.background;

  std::vector<std::vector<ScreenGrad>> tile_grads(tiling.lists.size());
  parallel_for(tiling.lists.size(), [&](size_t tile) {
    const int tx = static_cast<int>(tile) % tiling.tiles_x;
    const int ty = static_cast<int>(tile) / tiling.tiles_x;
    const auto& list = tiling.lists[tile];
    auto& grads = tile_grads[tile];
    grads.assign(list.size(), ScreenGrad{});

    struct Hit {
      int slot;
      double alpha, gauss, dx, dy, trans;
    };
    std::vector<Hit> hits;
    for (int y = ty * kTileSize; y < std::min(cam.height, (ty + 1) * kTileSize); ++y) {
      for (int x = tx * kTileSize; x < std::min(cam.width, (tx + 1) * kTileSize); ++x) {
        const Vec3 g_pix(grad_image.at(x, y, 0), grad_image.at(x, y, 1), grad_image.at(x, y, 2));
        if (g_pix.isZero(0.0)) continue;
        hits.clear();
        double trans = 1.0;
        for (size_t slot = 0; slot < list.size(); ++slot) {
          const Projected& p = proj.items[list[slot]];
          if (!covers(p, x, y)) continue;
          Hit h{static_cast<int>(slot), 0, 0, 0, 0, trans};
          h.alpha = splat_alpha(p.splat, x, y, h.gauss, h.dx, h.dy);
          if (h.alpha == 0.0) continue;
          hits.push_back(h);
          trans *= 1.0 - h.alpha;
        }
        // behind = color seen through everything after the current splat
        Vec3 behind = bg;
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const Projected& p = proj.items[list[it->slot]];
          ScreenGrad& sg = grads[it->slot];
          const double w = it->alpha * it->trans;
          sg.color += w * g_pix;
          const double d_alpha = it->trans * g_pix.dot(p.splat.color - behind);
          behind = it->alpha * p.splat.color + (1.0 - it->alpha) * behind;

          sg.peak_alpha += d_alpha * it->gauss;
          const double d_power = d_alpha * it->alpha;
          const Mat2& k = p.splat.inv_cov;
          // power = -1/2 (a dx^2 + 2 b dx dy + c dy^2), dx = px - center
          sg.conic_a += -0.5 * it->dx * it->dx * d_power;
          sg.conic_b += -it->dx * it->dy * d_power;
          sg.conic_c += -0.5 * it->dy * it->dy * d_power;
          sg.center_x += (k(0, 0) * it->dx + k(0, 1) * it->dy) * d_power;
          sg.center_y += (k(0, 1) * it->dx + k(1, 1) * it->dy) * d_power;
        }
      }
    }
  });

  // Deterministic reduction in tile order.
  std::vector<ScreenGrad> screen(proj.items.size());
  for (size_t tile = 0; tile < tiling.lists.size(); ++tile) {
    const auto& list = tiling.lists[tile];
    for (size_t slot = 0; slot < list.size(); ++slot) screen[list[slot]] += tile_grads[tile][slot];
  }

  GradientBuffer out(scene.gaussians.size());
  const Mat3& w = proj.view_rot;
  const double l = scene.cycle_length;
  std::vector<Mat3> grad_view(proj.items.size(), Mat3::Zero());
  std::vector<Vec3> grad_translation(proj.items.size(), Vec3::Zero());
  std::vector<double> grad_time(proj.items.size(), 0.0);

  parallel_for(proj.items.size(), [&](size_t k) {
    const Projected& p = proj.items[k];
    const ScreenGrad& sg = screen[k];
    const PVGaussian& g = scene.gaussians[p.splat.index];
    GaussianGrad& gg = out.gaussians[p.splat.index];

    gg.color = sg.color;

    const double d_opacity = p.alpha_clamped ? 0.0 : sg.peak_alpha;
    const OpacityPartials op = opacity_partials(g, t);
    gg.opacity_logit += d_opacity * op.d_opacity_logit;
    gg.tau += d_opacity * op.d_tau;
    gg.log_beta += d_opacity * op.d_log_beta;
    double d_t = d_opacity * op.d_t;

    // conic -> screen covariance: dK = -K dS K
    const Mat2& kinv = p.splat.inv_cov;
    Mat2 g_conic;
    g_conic << sg.conic_a, 0.5 * sg.conic_b, 0.5 * sg.conic_b, sg.conic_c;
    const Mat2 g_cov = -kinv * g_conic * kinv;

    const double x = p.p_cam.x(), y = p.p_cam.y(), z = p.p_cam.z();
    const double iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_pcam;
    g_pcam.x() = sg.center_x * cam.fx * iz;
    g_pcam.y() = sg.center_y * cam.fy * iz;
    g_pcam.z() = -sg.center_x * cam.fx * x * iz2 - sg.center_y * cam.fy * y * iz2;

    // cov = J M J^T
    const Mat23 g_jac = 2.0 * g_cov * p.jac * p.sigma_view;
    const Mat3 g_m = p.jac.transpose() * g_cov * p.jac;
    g_pcam.x() += g_jac(0, 2) * (-cam.fx * iz2);
    g_pcam.y() += g_jac(1, 2) * (-cam.fy * iz2);
    g_pcam.z() += g_jac(0, 0) * (-cam.fx * iz2) + g_jac(0, 2) * (2.0 * cam.fx * x * iz3) +
                  g_jac(1, 1) * (-cam.fy * iz2) + g_jac(1, 2) * (2.0 * cam.fy * y * iz3);

    // M = W Sigma W^T
    const Mat3 g_sigma = w.transpose() * g_m * w;
    Mat3 g_w = 2.0 * g_m * w * p.sigma;

    // p_cam = W (mu_t - T)
    const Vec3 rel = p.mu_t - cam.pose.translation;
    g_w += g_pcam * rel.transpose();
    const Vec3 g_mu_t = w.transpose() * g_pcam;
    grad_translation[k] = -g_mu_t;
    grad_view[k] = g_w;

    const PositionPartials pp = position_partials(g, t, l);
    gg.mu += g_mu_t;
    gg.velocity += pp.d_velocity * g_mu_t;
    gg.tau += pp.d_tau.dot(g_mu_t);
    d_t += pp.d_t.dot(g_mu_t);
    grad_time[k] = d_t;

    // Sigma = L L^T, L = R diag(scale)
    const Mat3 lmat = p.rot_g * p.scale.asDiagonal();
    const Mat3 g_l = 2.0 * g_sigma * lmat;
    const Mat3 g_rot = g_l * p.scale.asDiagonal();
    for (int c = 0; c < 3; ++c) gg.log_scale[c] = p.scale[c] * g_l.col(c).dot(p.rot_g.col(c));
    gg.rot = to_rotation_backward(g.rot, g_rot);
  });

  Mat3 g_view_total = Mat3::Zero();
  for (size_t k = 0; k < proj.items.size(); ++k) {
    g_view_total += grad_view[k];
    out.cam_translation += grad_translation[k];
    out.time += grad_time[k];
  }
  // W = R^T
  out.cam_rotation = to_rotation_backward(cam.pose.rotation, g_view_total.transpose());
  return out;
}

Camera downsampled_camera(const Camera& cam, int factor) {
  check_factor(cam, factor);
  return cam.downsampled(factor);
}

RenderOutput render_downsampled(const SceneModel& scene, const Camera& cam, double t, int factor) {
  return render(scene, downsampled_camera(cam, factor), t);
}

GradientBuffer render_downsampled_backward(const SceneModel& scene, const Camera& cam, double t,
                                           int factor, const Image& grad_image) {
  return render_backward(scene, downsampled_camera(cam, factor), t, grad_image);
}

}  // namespace pvg4d
