#include "pvg4d/image.hpp"

namespace pvg4d {

Image box_downsample(const Image& img, int factor) {
  if (factor < 1 || img.width % factor != 0 || img.height % factor != 0)
    throw ResolutionMismatch("box_downsample: " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + " not divisible by " +
                             std::to_string(factor));
  if (factor == 1) return img;
  Image out(img.width / factor, img.height / factor, img.channels);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) sum += img.at(x * factor + dx, y * factor + dy, c);
        out.at(x, y, c) = sum * inv;
      }
  return out;
}

Image nearest_upsample(const Image& img, int factor) {
  Image out(img.width * factor, img.height * factor, img.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x / factor, y / factor, c);
  return out;
}

}  // namespace pvg4d
