#pragma once

#include "pvg4d/image.hpp"

#include <filesystem>
#include <stdexcept>

namespace pvg4d {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BitDepth { k8 = 8, k16 = 16 };

/// Writes a 1- or 3-channel image in [0,1] as PNG (values clamped).
void write_png(const std::filesystem::path& path, const Image& img, BitDepth depth = BitDepth::k8);

/// Reads an 8- or 16-bit grayscale or RGB PNG into [0,1].
Image read_png(const std::filesystem::path& path);

/// Gray image rescaled so its maximum maps to 1 (all-zero stays zero).
Image normalized_for_display(const Image& gray);

}  // namespace pvg4d
