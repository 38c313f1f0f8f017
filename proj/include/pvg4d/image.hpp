#pragma once

#include <cassert>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvg4d {

class ResolutionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major image with interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  size_t index(int x, int y, int c = 0) const {
    assert(x >= 0 && x < width && y >= 0 && y < height && c >= 0 && c < channels);
    return (static_cast<size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ResolutionMismatch(std::string(what) + ": " + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + "x" + std::to_string(a.channels) +
                             " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                             "x" + std::to_string(b.channels));
  }
}

/// Box-filter downsample by an integer factor.
Image box_downsample(const Image& img, int factor);

/// Nearest-neighbour upsample by an integer factor.
Image nearest_upsample(const Image& img, int factor);

}  // namespace pvg4d
