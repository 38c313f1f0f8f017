#include "pvg4d/io.hpp"

#include "pvg4d/image_io.hpp"

#include <cereal/archives/binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>
#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace pvg4d {

namespace fs = std::filesystem;

namespace {

constexpr char kCheckpointMagic[] = "PVG4DCKP";

std::string pose_fields(const Pose& p) {
  const Quat& q = p.rotation;
  const Vec3& t = p.translation;
  return fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}", q.w, q.x, q.y, q.z, t.x(),
                     t.y(), t.z());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  return in;
}

}  // namespace

void save_capture(const Capture& capture, const fs::path& dir) {
  ensure_dir(dir);
  std::ofstream meta = open_out(dir / "capture.txt");
  const Camera& k = capture.intrinsics;
  meta << "pvg4d-capture 1\n";
  meta << fmt::format("intrinsics {} {} {:.17g} {:.17g} {:.17g} {:.17g}\n", k.width, k.height, k.fx, k.fy, k.cx,
                      k.cy);
  for (size_t i = 0; i < capture.frames.size(); ++i) {
    const std::string file = fmt::format("frame_{:02d}.png", i);
    write_png(dir / file, capture.frames[i].image, BitDepth::k16);
    meta << fmt::format("frame {} {:.17g} {}\n", file, capture.frames[i].time, pose_fields(capture.frames[i].pose));
  }
  for (size_t i = 0; i < capture.holdout.size(); ++i) {
    const std::string file = fmt::format("holdout_{:02d}.png", i);
    write_png(dir / file, capture.holdout[i].image, BitDepth::k16);
    meta << fmt::format("holdout {} {} {:.17g} {}\n", file, capture.holdout_bracket[i], capture.holdout[i].time,
                        pose_fields(capture.holdout[i].pose));
  }
  if (!meta) throw IoError((dir / "capture.txt").string() + ": write failed");
}

Capture load_capture(const fs::path& dir) {
  const fs::path meta_path = dir / "capture.txt";
  std::ifstream meta = open_in(meta_path);
  Capture c;
  std::string line;
  int lineno = 0;
  bool header = false, intrinsics = false;
  auto fail = [&](const std::string& msg) -> void {
    throw IoError(fmt::format("{}:{}: {}", meta_path.string(), lineno, msg));
  };
  auto read_pose = [&](std::istringstream& ss, Pose& p) {
    ss >> p.rotation.w >> p.rotation.x >> p.rotation.y >> p.rotation.z >> p.translation.x() >>
        p.translation.y() >> p.translation.z();
  };
  while (std::getline(meta, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (!header) {
      int version = 0;
      ss >> version;
      if (tag != "pvg4d-capture" || version != 1) fail("not a version 1 capture metadata file");
      header = true;
      continue;
    }
    if (tag == "intrinsics") {
      ss >> c.intrinsics.width >> c.intrinsics.height >> c.intrinsics.fx >> c.intrinsics.fy >> c.intrinsics.cx >>
          c.intrinsics.cy;
      intrinsics = true;
    } else if (tag == "frame" || tag == "holdout") {
      CaptureFrame f;
      std::string file;
      int bracket = -1;
      ss >> file;
      if (tag == "holdout") ss >> bracket;
      ss >> f.time;
      read_pose(ss, f.pose);
      if (!ss) fail("malformed " + tag + " record");
      try {
        f.image = read_png(dir / file);
      } catch (const IoError& e) {
        fail(e.what());
      }
      if (tag == "frame") {
        c.frames.push_back(std::move(f));
      } else {
        c.holdout.push_back(std::move(f));
        c.holdout_bracket.push_back(bracket);
      }
      continue;
    } else {
      fail("unknown record '" + tag + "'");
    }
    if (!ss) fail("malformed " + tag + " record");
  }
  if (!header || !intrinsics) throw IoError(meta_path.string() + ": missing header or intrinsics");
  if (c.frames.size() < 2) throw IoError(meta_path.string() + ": capture needs at least two frames");
  for (const CaptureFrame& f : c.frames)
    if (f.image.width != c.intrinsics.width || f.image.height != c.intrinsics.height)
      throw IoError(meta_path.string() + ": frame size does not match the intrinsics");
  for (int b : c.holdout_bracket)
    if (b < 0 || b + 1 >= static_cast<int>(c.frames.size()))
      throw IoError(meta_path.string() + ": holdout bracket out of range");
  return c;
}

namespace {

template <class Archive>
void archive_image(Archive& ar, Image& img) {
  ar(img.width, img.height, img.channels, img.data);
}

template <class Archive>
void archive_adam(Archive& ar, AdamState& s) {
  ar(s.m, s.v, s.step);
}

template <class Archive>
void archive_model(Archive& ar, SceneModel& model, bool loading) {
  std::vector<double> mu, rot, scale, opacity, color, velocity, tau, log_beta;
  if (!loading) {
    for (const PVGaussian& g : model.gaussians) {
      mu.insert(mu.end(), {g.mu.x(), g.mu.y(), g.mu.z()});
      rot.insert(rot.end(), {g.rot.w, g.rot.x, g.rot.y, g.rot.z});
      scale.insert(scale.end(), {g.log_scale.x(), g.log_scale.y(), g.log_scale.z()});
      opacity.push_back(g.opacity_logit);
      color.insert(color.end(), {g.color.x(), g.color.y(), g.color.z()});
      velocity.insert(velocity.end(), {g.velocity.x(), g.velocity.y(), g.velocity.z()});
      tau.push_back(g.tau);
      log_beta.push_back(g.log_beta);
    }
  }
  double bg[3] = {model.background.x(), model.background.y(), model.background.z()};
  ar(model.cycle_length, bg[0], bg[1], bg[2], mu, rot, scale, opacity, color, velocity, tau, log_beta);
  if (!loading) return;
  model.background = Vec3(bg[0], bg[1], bg[2]);
  const size_t n = opacity.size();
  if (mu.size() != 3 * n || rot.size() != 4 * n || scale.size() != 3 * n || color.size() != 3 * n ||
      velocity.size() != 3 * n || tau.size() != n || log_beta.size() != n)
    throw IoError("checkpoint Gaussian arrays have inconsistent lengths");
  model.gaussians.resize(n);
  for (size_t i = 0; i < n; ++i) {
    PVGaussian& g = model.gaussians[i];
    g.mu = Vec3(mu[3 * i], mu[3 * i + 1], mu[3 * i + 2]);
    g.rot = Quat{rot[4 * i], rot[4 * i + 1], rot[4 * i + 2], rot[4 * i + 3]};
    g.log_scale = Vec3(scale[3 * i], scale[3 * i + 1], scale[3 * i + 2]);
    g.opacity_logit = opacity[i];
    g.color = Vec3(color[3 * i], color[3 * i + 1], color[3 * i + 2]);
    g.velocity = Vec3(velocity[3 * i], velocity[3 * i + 1], velocity[3 * i + 2]);
    g.tau = tau[i];
    g.log_beta = log_beta[i];
  }
}

template <class Archive>
void archive_state(Archive& ar, TrainState& s, bool loading) {
  ar(s.iteration, s.spatial_extent, s.delta_t);
  archive_model(ar, s.model, loading);
  uint64_t maps = s.umaps.size();
  ar(maps);
  if (loading) s.umaps.resize(maps);
  for (UncertaintyMap& m : s.umaps) {
    archive_image(ar, m.raw);
    ar(m.frame_id);
  }
  for (AdamState& a : s.gaussian_adam) archive_adam(ar, a);
  uint64_t dt = s.delta_t_adam.size(), um = s.umap_adam.size();
  ar(dt, um);
  if (loading) {
    s.delta_t_adam.resize(dt);
    s.umap_adam.resize(um);
  }
  for (AdamState& a : s.delta_t_adam) archive_adam(ar, a);
  for (AdamState& a : s.umap_adam) archive_adam(ar, a);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  cereal::BinaryOutputArchive ar(out);
  std::string magic = kCheckpointMagic;
  uint32_t version = Checkpoint::kVersion;
  Checkpoint copy = ckpt;
  ar(magic, version, copy.config_yaml, copy.scene, copy.arm);
  archive_state(ar, copy.state, false);
  if (!out) throw IoError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open checkpoint");
  Checkpoint ckpt;
  try {
    cereal::BinaryInputArchive ar(in);
    std::string magic;
    uint32_t version = 0;
    ar(magic);
    if (magic != kCheckpointMagic) throw IoError(path.string() + ": not a checkpoint file");
    ar(version);
    if (version != Checkpoint::kVersion)
      throw IoError(fmt::format("{}: checkpoint version {} is not supported (expected {})", path.string(), version,
                                Checkpoint::kVersion));
    ar(ckpt.config_yaml, ckpt.scene, ckpt.arm);
    archive_state(ar, ckpt.state, true);
  } catch (const cereal::Exception& e) {
    throw IoError(path.string() + ": truncated or corrupt checkpoint (" + e.what() + ")");
  } catch (const std::length_error&) {
    throw IoError(path.string() + ": corrupt checkpoint");
  } catch (const std::bad_alloc&) {
    throw IoError(path.string() + ": corrupt checkpoint");
  }
  return ckpt;
}

void save_pseudo_frame(const PseudoFrame& frame, int factor, const fs::path& stem) {
  if (stem.has_parent_path()) ensure_dir(stem.parent_path());
  write_png(stem.string() + ".png", frame.image, BitDepth::k16);
  std::ofstream side = open_out(stem.string() + ".txt");
  side << "pvg4d-pseudo 1\n";
  side << "bracket " << frame.bracket_start << "\n";
  side << "factor " << factor << "\n";
  if (frame.meta) {
    side << fmt::format("hidden_s {:.17g}\n", frame.meta->hidden_s);
    side << "preset " << frame.meta->preset << "\n";
    Image mask(frame.image.width, frame.image.height, 1);
    for (size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = frame.meta->corruption_mask[i];
    write_png(stem.string() + "_mask.png", mask, BitDepth::k8);
  }
}

PseudoFrame load_pseudo_frame(const fs::path& stem) {
  const std::string side_path = stem.string() + ".txt";
  std::ifstream side = open_in(side_path);
  PseudoFrame p;
  p.image = read_png(stem.string() + ".png");
  std::string line, key;
  int lineno = 0;
  OracleMeta meta;
  bool has_meta = false;
  while (std::getline(side, line)) {
    ++lineno;
    std::istringstream ss(line);
    ss >> key;
    if (lineno == 1) {
      if (key != "pvg4d-pseudo") throw IoError(side_path + ":1: not a pseudo-frame sidecar");
      continue;
    }
    if (key == "bracket") {
      ss >> p.bracket_start;
    } else if (key == "factor") {
      int f;
      ss >> f;
    } else if (key == "hidden_s") {
      ss >> meta.hidden_s;
      has_meta = true;
    } else if (key == "preset") {
      ss >> meta.preset;
    } else if (!key.empty()) {
      throw IoError(fmt::format("{}:{}: unknown key '{}'", side_path, lineno, key));
    }
    if (!ss) throw IoError(fmt::format("{}:{}: malformed line", side_path, lineno));
  }
  if (has_meta) {
    const Image mask = read_png(stem.string() + "_mask.png");
    meta.corruption_mask.resize(mask.data.size());
    for (size_t i = 0; i < mask.data.size(); ++i) meta.corruption_mask[i] = mask.data[i] > 0.5 ? 1 : 0;
    p.meta = std::move(meta);
  }
  return p;
}

void export_uncertainty(const UncertaintyMap& map, const fs::path& stem) {
  if (stem.has_parent_path()) ensure_dir(stem.parent_path());
  const Image beta = map.exposed();
  write_png(stem.string() + ".png", normalized_for_display(beta), BitDepth::k8);
  std::ofstream side = open_out(stem.string() + ".txt");
  side << "pvg4d-uncertainty 1\n";
  side << "size " << beta.width << " " << beta.height << " frame " << map.frame_id << "\n";
  for (int y = 0; y < beta.height; ++y) {
    for (int x = 0; x < beta.width; ++x) side << (x ? " " : "") << fmt::format("{:.17g}", beta.at(x, y));
    side << "\n";
  }
  if (!side) throw IoError(stem.string() + ".txt: write failed");
}

Image load_uncertainty_values(const fs::path& stem) {
  const std::string path = stem.string() + ".txt";
  std::ifstream in = open_in(path);
  std::string tag, size_kw, frame_kw;
  int version = 0, w = 0, h = 0, frame = 0;
  in >> tag >> version >> size_kw >> w >> h >> frame_kw >> frame;
  if (!in || tag != "pvg4d-uncertainty" || version != 1 || size_kw != "size" || w <= 0 || h <= 0)
    throw IoError(path + ": not a version 1 uncertainty sidecar");
  Image img(w, h, 1);
  for (double& v : img.data)
    if (!(in >> v)) throw IoError(path + ": too few values");
  return img;
}

}  // namespace pvg4d
