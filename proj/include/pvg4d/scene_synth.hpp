#pragma once

// Ground-truth synthetic dynamic scenes and their captures. A scene is a
// textured static wall plus rigid movers. Each mover is realized as a dense
// train of short-lived PVG copies along its trajectory, so the ground truth
// is itself a valid SceneModel rendered by the same rasterizer.

#include "pvg4d/geom.hpp"
#include "pvg4d/image.hpp"
#include "pvg4d/pose_interp.hpp"
#include "pvg4d/pvg_model.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvg4d {

class SpecInvalid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Trajectory { Linear, Arc };

struct MoverSpec {
  Trajectory trajectory = Trajectory::Linear;
  Vec3 anchor = Vec3(0, 0, 2.5);       // start point (linear) or circle center (arc)
  Vec3 direction = Vec3::UnitX();      // linear direction, normalized on use
  double radius = 0.5;                 // arc radius, in a plane parallel to the image
  double phase = 0.0;                  // arc start angle
  double speed = 1.0;                  // world units per unit time
  double size = 0.15;                  // cluster half extent
  Vec3 color = Vec3(0.9, 0.2, 0.1);
  int gaussian_count = 5;

  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
};

struct BackgroundSpec {
  double depth = 4.0;
  double half_width = 2.8;
  double half_height = 2.0;
  int nx = 37;
  int ny = 27;
  uint64_t texture_seed = 1;
};

struct SynthSceneSpec {
  BackgroundSpec background;
  std::vector<MoverSpec> movers;
  Vec3 clear_color = Vec3(0.5, 0.5, 0.5);
  double cycle_length = 0.3;
  double copy_spacing = 1.0 / 60.0;  // time between consecutive mover copies
  double copy_lifespan_ratio = 0.6;  // lifespan / copy_spacing

  void validate() const;
};

/// Ground-truth scene with per-Gaussian object labels (-1 = background).
struct SynthScene {
  SynthSceneSpec spec;
  SceneModel model;
  std::vector<int> object_of;

  int object_count() const { return static_cast<int>(spec.movers.size()); }
  /// Scene holding only the Gaussians of one object (-1 for the wall).
  SceneModel object_only(int object) const;
};

SynthScene make_scene(const SynthSceneSpec& spec);

struct CameraPath {
  Camera intrinsics;  // pose ignored
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  double yaw_start = 0.0;  // radians about the camera y axis
  double yaw_end = 0.0;

  Pose pose_at(double t) const;
};

struct CaptureFrame {
  Image image;
  Pose pose;
  double time = 0.0;
};

struct Capture {
  Camera intrinsics;
  std::vector<CaptureFrame> frames;
  /// holdout[i] lies between frames[holdout_bracket[i]] and the next frame.
  std::vector<CaptureFrame> holdout;
  std::vector<int> holdout_bracket;

  Camera camera_for(const Pose& pose) const;
  PosePair pair(int i) const;
};

/// n_frames training frames at t = i / (n_frames - 1) plus mid-frame holdouts
/// in a holdout_fraction share of the intervals, spread evenly.
Capture make_capture(const SynthScene& scene, const CameraPath& path, int n_frames,
                     double holdout_fraction = 1.0);

struct ObjectFlow {
  int object = -1;  // -1 = background
  double mean_flow_px = 0.0;
};

/// Analytic mean projected displacement per object between frames i, i + 1.
std::vector<ObjectFlow> gt_flow_magnitude(const SynthScene& scene, const Capture& capture,
                                          int frame_pair);

/// Pixels where the object's own render reaches `threshold` alpha.
std::vector<unsigned char> object_mask(const SynthScene& scene, int object, const Camera& cam,
                                       double t, double threshold = 0.5);

struct InitOptions {
  double position_noise = 0.01;
  double initial_opacity = 0.5;
  double mover_lifespan = 0.04;
  bool velocity_from_flow = true;  // finite-difference scene flow of sampled points

  friend bool operator==(const InitOptions&, const InitOptions&) = default;
};

/// LiDAR-like initialization: wall points from the first frame, mover points
/// sampled only at training timestamps, colors read from the capture images.
SceneModel lidar_init(const SynthScene& scene, const Capture& capture, const InitOptions& opts,
                      std::mt19937_64& rng);

/// The six-scene synthetic benchmark at 96x64 with 16 training frames.
struct BenchmarkScene {
  std::string name;
  SynthSceneSpec spec;
  CameraPath path;
  int n_frames = 16;
};
std::vector<BenchmarkScene> fastmover6();

/// A static wall under a strongly panning camera with one slow mover; the
/// interpolated camera pose alone pins down the timestamp of a mid-frame.
BenchmarkScene panning_scene();

}  // namespace pvg4d
