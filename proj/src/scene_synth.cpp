#include "pvg4d/scene_synth.hpp"

#include "pvg4d/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pvg4d {

namespace {

constexpr double kStaticLogBeta = 8.0;
constexpr double kOpaque = 0.95;

std::vector<Vec3> cluster_offsets(const MoverSpec& m) {
  std::vector<Vec3> out{Vec3::Zero()};
  const int ring = m.gaussian_count - 1;
  for (int k = 0; k < ring; ++k) {
    const double a = 2.0 * kPi * k / ring;
    out.emplace_back(0.6 * m.size * std::cos(a), 0.6 * m.size * std::sin(a), 0.0);
  }
  return out;
}

Vec3 wall_color(double x, double y, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.08, 0.08);
  const double stripe = std::sin(7.0 * x) * std::sin(5.0 * y) > 0 ? 0.08 : -0.08;
  Vec3 c(0.55 + 0.25 * std::sin(1.7 * x + 0.5) * std::cos(1.3 * y) + stripe,
         0.50 + 0.25 * std::sin(1.1 * y + 0.6 * x + 1.0) - stripe,
         0.45 + 0.25 * std::cos(0.9 * x - 1.4 * y) + stripe);
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(c[i] + jitter(rng), 0.02, 0.98);
  return c;
}

bool in_image(const Camera& cam, const Vec2& px) {
  return px.x() >= 0 && px.y() >= 0 && px.x() < cam.width && px.y() < cam.height;
}

Vec3 sample_color(const Image& img, const Camera& cam, const Vec3& p, bool* ok) {
  const Vec3 pc = cam.pose.world_to_camera(p);
  *ok = false;
  if (pc.z() <= kNearPlane) return Vec3::Constant(0.5);
  const Vec2 px = project(cam, pc);
  if (!in_image(cam, px)) return Vec3::Constant(0.5);
  *ok = true;
  const int x = static_cast<int>(px.x()), y = static_cast<int>(px.y());
  return Vec3(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
}

/// sqrt of the mean squared distance to the three nearest neighbours.
std::vector<double> knn_scale(const std::vector<Vec3>& pts) {
  std::vector<double> out(pts.size(), 0.05);
  for (size_t i = 0; i < pts.size(); ++i) {
    double best[3] = {std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
    for (size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const double d = (pts[i] - pts[j]).squaredNorm();
      if (d < best[2]) {
        best[2] = d;
        std::sort(best, best + 3);
      }
    }
    int n = 0;
    double s = 0.0;
    for (double b : best)
      if (std::isfinite(b)) s += b, ++n;
    if (n > 0) out[i] = std::max(std::sqrt(s / n), 1e-3);
  }
  return out;
}

}  // namespace

Vec3 MoverSpec::position(double t) const {
  if (trajectory == Trajectory::Linear) return anchor + direction.normalized() * speed * t;
  const double a = phase + speed / radius * t;
  return anchor + radius * Vec3(std::cos(a), std::sin(a), 0.0);
}

Vec3 MoverSpec::velocity(double t) const {
  if (trajectory == Trajectory::Linear) return direction.normalized() * speed;
  const double a = phase + speed / radius * t;
  return speed * Vec3(-std::sin(a), std::cos(a), 0.0);
}

void SynthSceneSpec::validate() const {
  if (!(copy_spacing > 0)) throw SpecInvalid("copy_spacing must be positive");
  if (!(copy_lifespan_ratio > 0)) throw SpecInvalid("copy_lifespan_ratio must be positive");
  if (!(cycle_length > 0)) throw SpecInvalid("cycle_length must be positive");
  if (background.nx < 2 || background.ny < 2) throw SpecInvalid("background grid needs >= 2x2");
  if (!(background.depth > 0)) throw SpecInvalid("background depth must be positive");
  if (!(background.half_width > 0 && background.half_height > 0))
    throw SpecInvalid("background extent must be positive");
  for (size_t i = 0; i < movers.size(); ++i) {
    const MoverSpec& m = movers[i];
    const std::string id = "mover " + std::to_string(i) + ": ";
    if (m.gaussian_count < 1) throw SpecInvalid(id + "gaussian_count must be >= 1");
    if (!(m.speed >= 0)) throw SpecInvalid(id + "speed must be >= 0");
    if (!(m.size > 0)) throw SpecInvalid(id + "size must be positive");
    if (m.trajectory == Trajectory::Arc && !(m.radius > 0)) throw SpecInvalid(id + "arc radius must be positive");
    if (m.trajectory == Trajectory::Linear && m.direction.norm() == 0)
      throw SpecInvalid(id + "linear direction must be nonzero");
    if ((m.color.array() < 0).any() || (m.color.array() > 1).any())
      throw SpecInvalid(id + "color must lie in [0,1]");
  }
}

SceneModel SynthScene::object_only(int object) const {
  SceneModel out;
  out.cycle_length = model.cycle_length;
  out.background = Vec3::Zero();
  for (size_t i = 0; i < model.gaussians.size(); ++i)
    if (object_of[i] == object) out.gaussians.push_back(model.gaussians[i]);
  return out;
}

SynthScene make_scene(const SynthSceneSpec& spec) {
  spec.validate();
  SynthScene s;
  s.spec = spec;
  s.model.cycle_length = spec.cycle_length;
  s.model.background = spec.clear_color;

  const BackgroundSpec& bg = spec.background;
  std::mt19937_64 rng(bg.texture_seed);
  const double dx = 2.0 * bg.half_width / (bg.nx - 1);
  const double dy = 2.0 * bg.half_height / (bg.ny - 1);
  for (int j = 0; j < bg.ny; ++j) {
    for (int i = 0; i < bg.nx; ++i) {
      PVGaussian g;
      const double x = -bg.half_width + i * dx, y = -bg.half_height + j * dy;
      // Small depth relief keeps the compositing order of neighbouring wall
      // splats fixed under small camera rotations.
      const double relief = 0.01 * ((i + 4 * j) % 15 - 7);
      g.mu = Vec3(x, y, bg.depth + relief);
      g.log_scale = Vec3(std::log(0.6 * dx), std::log(0.6 * dy), std::log(0.05 * dx));
      g.opacity_logit = logit(kOpaque);
      g.color = wall_color(x, y, rng);
      g.tau = 0.5;
      g.log_beta = kStaticLogBeta;
      s.model.gaussians.push_back(g);
      s.object_of.push_back(-1);
    }
  }

  const double delta = spec.copy_spacing;
  const double log_life = std::log(spec.copy_lifespan_ratio * delta);
  const int first = -2;
  const int last = static_cast<int>(std::ceil(1.0 / delta)) + 2;
  for (size_t m = 0; m < spec.movers.size(); ++m) {
    const MoverSpec& mv = spec.movers[m];
    const std::vector<Vec3> offsets = cluster_offsets(mv);
    for (int k = first; k <= last; ++k) {
      const double tau = k * delta;
      for (size_t o = 0; o < offsets.size(); ++o) {
        PVGaussian g;
        g.mu = mv.position(tau) + offsets[o];
        g.velocity = mv.velocity(tau);
        g.log_scale = Vec3(std::log(0.45 * mv.size), std::log(0.45 * mv.size), std::log(0.2 * mv.size));
        g.opacity_logit = logit(kOpaque);
        g.color = (mv.color * (o == 0 ? 1.0 : 0.85)).cwiseMin(1.0);
        g.tau = tau;
        g.log_beta = log_life;
        s.model.gaussians.push_back(g);
        s.object_of.push_back(static_cast<int>(m));
      }
    }
  }
  return s;
}

Pose CameraPath::pose_at(double t) const {
  Pose p;
  p.rotation = Quat::from_axis_angle(Vec3::UnitY(), (1.0 - t) * yaw_start + t * yaw_end);
  p.translation = (1.0 - t) * start + t * end;
  return p;
}

Camera Capture::camera_for(const Pose& pose) const {
  Camera c = intrinsics;
  c.pose = pose;
  return c;
}

PosePair Capture::pair(int i) const {
  PosePair p;
  p.p_start = frames.at(i).pose;
  p.p_end = frames.at(i + 1).pose;
  p.time_start = frames[i].time;
  p.time_end = frames[i + 1].time;
  return p;
}

Capture make_capture(const SynthScene& scene, const CameraPath& path, int n_frames,
                     double holdout_fraction) {
  if (n_frames < 4) throw SpecInvalid("a capture needs at least 4 frames");
  path.intrinsics.validate();
  Capture cap;
  cap.intrinsics = path.intrinsics;
  for (int i = 0; i < n_frames; ++i) {
    CaptureFrame f;
    f.time = static_cast<double>(i) / (n_frames - 1);
    f.pose = path.pose_at(f.time);
    f.image = render(scene.model, cap.camera_for(f.pose), f.time).image;
    cap.frames.push_back(std::move(f));
  }
  const int intervals = n_frames - 1;
  const int k = std::clamp(static_cast<int>(std::lround(holdout_fraction * intervals)), 0, intervals);
  for (int j = 0; j < k; ++j) {
    const int i = static_cast<int>((j + 0.5) * intervals / k);
    const InterpolatedPose ip = interp_pose_at(cap.pair(i), 0.5);
    CaptureFrame f;
    f.time = ip.time;
    f.pose = ip.pose;
    f.image = render(scene.model, cap.camera_for(f.pose), f.time).image;
    cap.holdout.push_back(std::move(f));
    cap.holdout_bracket.push_back(i);
  }
  return cap;
}

std::vector<ObjectFlow> gt_flow_magnitude(const SynthScene& scene, const Capture& capture,
                                          int frame_pair) {
  const CaptureFrame& a = capture.frames.at(frame_pair);
  const CaptureFrame& b = capture.frames.at(frame_pair + 1);
  const Camera ca = capture.camera_for(a.pose), cb = capture.camera_for(b.pose);

  auto displacement = [&](const Vec3& pa, const Vec3& pb, double* out) {
    const Vec3 qa = ca.pose.world_to_camera(pa), qb = cb.pose.world_to_camera(pb);
    if (qa.z() <= kNearPlane || qb.z() <= kNearPlane) return false;
    *out = (project(cb, qb) - project(ca, qa)).norm();
    return true;
  };

  std::vector<ObjectFlow> out;
  {
    double sum = 0.0;
    int n = 0;
    for (size_t i = 0; i < scene.model.gaussians.size(); ++i) {
      if (scene.object_of[i] != -1) continue;
      const Vec3& p = scene.model.gaussians[i].mu;
      const Vec3 qa = ca.pose.world_to_camera(p);
      if (qa.z() <= kNearPlane || !in_image(ca, project(ca, qa))) continue;
      double d;
      if (displacement(p, p, &d)) sum += d, ++n;
    }
    out.push_back({-1, n > 0 ? sum / n : 0.0});
  }
  for (int m = 0; m < scene.object_count(); ++m) {
    const MoverSpec& mv = scene.spec.movers[m];
    double sum = 0.0;
    int n = 0;
    for (const Vec3& o : cluster_offsets(mv)) {
      double d;
      if (displacement(mv.position(a.time) + o, mv.position(b.time) + o, &d)) sum += d, ++n;
    }
    out.push_back({m, n > 0 ? sum / n : 0.0});
  }
  return out;
}

std::vector<unsigned char> object_mask(const SynthScene& scene, int object, const Camera& cam,
                                       double t, double threshold) {
  const RenderOutput r = render(scene.object_only(object), cam, t);
  std::vector<unsigned char> mask(r.alpha_map.pixel_count());
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = r.alpha_map.data[i] >= threshold ? 1 : 0;
  return mask;
}

SceneModel lidar_init(const SynthScene& scene, const Capture& capture, const InitOptions& opts,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, opts.position_noise);
  auto jitter = [&](const Vec3& p) { return Vec3(p.x() + noise(rng), p.y() + noise(rng), p.z() + noise(rng)); };

  SceneModel out;
  out.cycle_length = scene.model.cycle_length;
  out.background = scene.spec.clear_color;

  // Static points: one sweep of the wall, colored from the first frame that sees them.
  std::vector<Vec3> wall;
  std::vector<Vec3> wall_colors;
  for (size_t i = 0; i < scene.model.gaussians.size(); ++i) {
    if (scene.object_of[i] != -1) continue;
    const Vec3 p = jitter(scene.model.gaussians[i].mu);
    Vec3 color = Vec3::Constant(0.5);
    for (const CaptureFrame& f : capture.frames) {
      bool ok;
      const Vec3 c = sample_color(f.image, capture.camera_for(f.pose), p, &ok);
      if (ok) {
        color = c;
        break;
      }
    }
    wall.push_back(p);
    wall_colors.push_back(color);
  }
  const std::vector<double> wall_scale = knn_scale(wall);
  for (size_t i = 0; i < wall.size(); ++i) {
    PVGaussian g;
    g.mu = wall[i];
    g.log_scale = Vec3::Constant(std::log(wall_scale[i]));
    g.opacity_logit = logit(opts.initial_opacity);
    g.color = wall_colors[i];
    g.tau = 0.5;
    g.log_beta = std::log(5.0);
    out.gaussians.push_back(g);
  }

  // Dynamic points: returns only at the training timestamps.
  const int n = static_cast<int>(capture.frames.size());
  for (int m = 0; m < scene.object_count(); ++m) {
    const MoverSpec& mv = scene.spec.movers[m];
    const std::vector<Vec3> offsets = cluster_offsets(mv);
    std::vector<std::vector<Vec3>> samples(n);
    for (int k = 0; k < n; ++k)
      for (const Vec3& o : offsets) samples[k].push_back(jitter(mv.position(capture.frames[k].time) + o));
    for (int k = 0; k < n; ++k) {
      const Camera cam = capture.camera_for(capture.frames[k].pose);
      const std::vector<double> sc = knn_scale(samples[k]);
      for (size_t o = 0; o < offsets.size(); ++o) {
        bool ok;
        const Vec3 color = sample_color(capture.frames[k].image, cam, samples[k][o], &ok);
        if (!ok) continue;
        PVGaussian g;
        g.mu = samples[k][o];
        g.log_scale = Vec3::Constant(std::log(sc[o]));
        g.opacity_logit = logit(opts.initial_opacity);
        g.color = color;
        g.tau = capture.frames[k].time;
        g.log_beta = std::log(opts.mover_lifespan);
        if (opts.velocity_from_flow) {
          const int a = std::max(k - 1, 0), b = std::min(k + 1, n - 1);
          g.velocity = (samples[b][o] - samples[a][o]) /
                       (capture.frames[b].time - capture.frames[a].time);
        }
        out.gaussians.push_back(g);
      }
    }
  }
  return out;
}

std::vector<BenchmarkScene> fastmover6() {
  constexpr int kScenes = 6;
  constexpr int kFrames = 16;
  constexpr double kArcRadiusPx = 22.0;
  const double dt = 1.0 / (kFrames - 1);

  Camera cam;
  cam.width = 96;
  cam.height = 64;
  cam.fx = cam.fy = 80.0;
  cam.cx = 48.0;
  cam.cy = 32.0;

  // Twelve target flows, log-spaced over 2..40 px per frame; each scene pairs
  // a slower mover with a faster one.
  std::vector<double> flows;
  for (int i = 0; i < 2 * kScenes; ++i) flows.push_back(2.0 * std::pow(20.0, i / 11.0));

  const Vec3 palette[] = {{0.95, 0.15, 0.1}, {0.1, 0.35, 0.95}, {0.95, 0.85, 0.1},
                          {0.1, 0.85, 0.3},  {0.85, 0.1, 0.85}, {0.1, 0.9, 0.9}};

  std::vector<BenchmarkScene> out;
  for (int s = 0; s < kScenes; ++s) {
    BenchmarkScene b;
    b.name = "fastmover-6:" + std::to_string(s + 1);
    b.n_frames = kFrames;
    b.spec.background.texture_seed = 100 + s;
    b.spec.clear_color = Vec3(0.5, 0.5, 0.5);

    for (int j = 0; j < 2; ++j) {
      const double flow = flows[s + j * kScenes];
      const double depth = j == 0 ? 2.8 : 2.0;
      MoverSpec m;
      m.size = 0.22 * depth / 2.4;
      m.color = palette[(s + 3 * j) % 6];
      m.gaussian_count = 5;
      const double px_to_world = depth / cam.fx;
      if (flow * (kFrames - 1) <= 70.0) {
        m.trajectory = Trajectory::Linear;
        m.speed = flow * px_to_world / dt;
        const double y_px = j == 0 ? -16.0 : 14.0;
        m.anchor = Vec3(-0.5 * m.speed, y_px * px_to_world, depth);
        m.direction = Vec3::UnitX();
      } else {
        m.trajectory = Trajectory::Arc;
        const double angle_per_frame = 2.0 * std::asin(std::min(1.0, flow / (2.0 * kArcRadiusPx)));
        m.radius = kArcRadiusPx * px_to_world;
        m.speed = angle_per_frame / dt * m.radius;
        m.phase = 0.7 * s;
        const double cx_px = j == 0 ? -14.0 : 12.0;
        m.anchor = Vec3(cx_px * px_to_world, 0.0, depth);
      }
      b.spec.movers.push_back(m);
    }

    b.path.intrinsics = cam;
    const double side = (s % 2 == 0) ? 1.0 : -1.0;
    b.path.start = Vec3(-0.05 * side, 0.0, 0.0);
    b.path.end = Vec3(0.05 * side, 0.01 * s, 0.0);
    b.path.yaw_start = -0.013 * side;
    b.path.yaw_end = 0.013 * side;
    out.push_back(b);
  }
  return out;
}

BenchmarkScene panning_scene() {
  BenchmarkScene b;
  b.name = "panning";
  b.n_frames = 16;
  b.spec.background.half_width = 5.0;
  b.spec.background.nx = 66;
  b.spec.background.texture_seed = 42;
  MoverSpec m;
  m.trajectory = Trajectory::Linear;
  m.anchor = Vec3(-0.6, 0.35, 2.5);
  m.speed = 1.2;
  m.size = 0.2;
  m.color = Vec3(0.95, 0.2, 0.1);
  b.spec.movers.push_back(m);

  Camera cam;
  cam.width = 96;
  cam.height = 64;
  cam.fx = cam.fy = 80.0;
  cam.cx = 48.0;
  cam.cy = 32.0;
  b.path.intrinsics = cam;
  b.path.start = Vec3(-1.2, 0.0, 0.0);
  b.path.end = Vec3(1.2, 0.0, 0.0);
  return b;
}

}  // namespace pvg4d
