#pragma once

// On-disk formats: capture directories, binary checkpoints, the pseudo-frame
// cache and uncertainty-map exports.
//
// Capture directory: frame_NN.png and holdout_NN.png (16-bit RGB) plus
// capture.txt, a line-oriented text file:
//   pvg4d-capture 1
//   intrinsics <width> <height> <fx> <fy> <cx> <cy>
//   frame <file> <time> <qw> <qx> <qy> <qz> <tx> <ty> <tz>
//   holdout <file> <bracket> <time> <qw> <qx> <qy> <qz> <tx> <ty> <tz>
// Poses are camera-to-world; numbers are written with 17 significant digits.

#include "pvg4d/distill.hpp"
#include "pvg4d/scene_synth.hpp"
#include "pvg4d/train.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace pvg4d {

void save_capture(const Capture& capture, const std::filesystem::path& dir);
/// Throws IoError naming the file (and line for capture.txt) on any problem.
Capture load_capture(const std::filesystem::path& dir);

struct Checkpoint {
  static constexpr uint32_t kVersion = 1;
  std::string config_yaml;  // experiment config of the run
  std::string scene;        // single scene name
  std::string arm;
  TrainState state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IoError on a missing file, a foreign file or a version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// <stem>.png (16-bit), <stem>_mask.png when metadata is present and
/// <stem>.txt with bracket, factor and oracle metadata.
void save_pseudo_frame(const PseudoFrame& frame, int factor, const std::filesystem::path& stem);
PseudoFrame load_pseudo_frame(const std::filesystem::path& stem);

/// <stem>.png: 8-bit preview normalized per map. <stem>.txt: exact beta values.
void export_uncertainty(const UncertaintyMap& map, const std::filesystem::path& stem);
/// Exposed beta values read back from the text sidecar.
Image load_uncertainty_values(const std::filesystem::path& stem);

}  // namespace pvg4d
