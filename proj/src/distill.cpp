#include "pvg4d/distill.hpp"

#include <algorithm>
#include <cmath>

namespace pvg4d {

UncertaintyMap::UncertaintyMap(int width, int height, double initial_beta, int id)
    : raw(width, height, 1, softplus_inverse(initial_beta)), frame_id(id) {}

double UncertaintyMap::beta(int x, int y) const {
  return std::min(softplus(raw.at(x, y)), kMaxUncertainty);
}

double UncertaintyMap::dbeta_draw(int x, int y) const {
  const double r = raw.at(x, y);
  return softplus(r) >= kMaxUncertainty ? 0.0 : sigmoid(r);
}

Image UncertaintyMap::exposed() const {
  Image out(width(), height(), 1);
  for (int y = 0; y < height(); ++y)
    for (int x = 0; x < width(); ++x) out.at(x, y) = beta(x, y);
  return out;
}

double UncertaintyMap::mean_beta() const {
  double s = 0.0;
  for (int y = 0; y < height(); ++y)
    for (int x = 0; x < width(); ++x) s += beta(x, y);
  return s / static_cast<double>(raw.pixel_count());
}

Image residual_energy(const Image& render, const Image& pseudo) {
  require_same_shape(render, pseudo, "residual_energy");
  Image e(render.width, render.height, 1);
  for (size_t p = 0; p < e.pixel_count(); ++p) {
    double s = 0.0;
    for (int c = 0; c < render.channels; ++c) {
      const double d = render.data[p * render.channels + c] - pseudo.data[p * render.channels + c];
      s += d * d;
    }
    e.data[p] = s;
  }
  return e;
}

Image beta_opt(const Image& render, const Image& pseudo, double lambda_f) {
  Image e = residual_energy(render, pseudo);
  for (double& v : e.data) v = std::min(v / (2.0 * lambda_f), kMaxUncertainty);
  return e;
}

CaResult l_ca(const Image& render, const Image& pseudo, const UncertaintyMap& umap,
              const DistillWeights& w) {
  require_same_shape(render, pseudo, "l_ca");
  if (umap.width() != render.width || umap.height() != render.height)
    throw ResolutionMismatch("l_ca: uncertainty map does not match the pseudo-frame");

  const int nc = render.channels;
  const double inv_n = 1.0 / static_cast<double>(render.pixel_count());
  CaResult out;
  out.grad_image = Image(render.width, render.height, nc);
  out.grad_raw = Image(render.width, render.height, 1);
  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      const double b = umap.beta(x, y);
      double e = 0.0;
      for (int c = 0; c < nc; ++c) {
        const double d = render.at(x, y, c) - pseudo.at(x, y, c);
        e += d * d;
        out.grad_image.at(x, y, c) = w.omega_f * b * 2.0 * d * inv_n;
      }
      out.loss += w.omega_f * (b * e - w.lambda_f * b * b);
      out.grad_raw.at(x, y) = w.omega_f * (e - 2.0 * w.lambda_f * b) * umap.dbeta_draw(x, y) * inv_n;
    }
  }
  out.loss *= inv_n;
  return out;
}

TvResult l_tv(const UncertaintyMap& umap, double omega_tv) {
  const int wd = umap.width(), ht = umap.height();
  const Image b = umap.exposed();
  const double scale = omega_tv / static_cast<double>(b.pixel_count());
  TvResult out;
  Image g(wd, ht, 1);
  auto term = [&](int x0, int y0, int x1, int y1) {
    const double d = b.at(x1, y1) - b.at(x0, y0);
    out.loss += std::abs(d);
    const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    g.at(x1, y1) += s;
    g.at(x0, y0) -= s;
  };
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < wd; ++x) {
      if (x + 1 < wd) term(x, y, x + 1, y);
      if (y + 1 < ht) term(x, y, x, y + 1);
    }
  out.loss *= scale;
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < wd; ++x) g.at(x, y) *= scale * umap.dbeta_draw(x, y);
  out.grad_raw = std::move(g);
  return out;
}

DistillResult distill_step(const SceneModel& scene, const Camera& camera, const PosePair& pair,
                           const TimestampParam& tsp, const PseudoFrame& pseudo,
                           const UncertaintyMap& umap, const DistillWeights& w,
                           const DistillOptions& opts) {
  if (pseudo.image.width <= 0 || camera.width % pseudo.image.width != 0)
    throw ResolutionMismatch("distill_step: pseudo-frame width does not divide the camera width");
  const int factor = camera.width / pseudo.image.width;

  const InterpolatedPose ip = interp_pose(pair, tsp);
  Camera cam = camera;
  cam.pose = ip.pose;

  DistillResult out;
  out.render = render_downsampled(scene, cam, ip.time, factor);
  require_same_shape(out.render.image, pseudo.image, "distill_step");

  CaResult ca;
  if (opts.use_uncertainty) {
    ca = l_ca(out.render.image, pseudo.image, umap, w);
    const TvResult tv = l_tv(umap, w.omega_tv);
    out.loss_tv = tv.loss;
    out.umap_update_grad = tv.grad_raw;
    for (size_t i = 0; i < out.umap_update_grad.data.size(); ++i)
      out.umap_update_grad.data[i] -= ca.grad_raw.data[i];
  } else {
    const UncertaintyMap unit(pseudo.image.width, pseudo.image.height, 1.0, umap.frame_id);
    ca = l_ca(out.render.image, pseudo.image, unit, w);
    out.umap_update_grad = Image(pseudo.image.width, pseudo.image.height, 1);
  }
  out.loss_ca = ca.loss;
  out.scene_grad = render_downsampled_backward(scene, cam, ip.time, factor, ca.grad_image);
  if (opts.want_delta_t) out.grad_delta_t = dloss_d_delta_t(out.scene_grad, pair, tsp);
  return out;
}

}  // namespace pvg4d
