#include "pvg4d/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace pvg4d {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img, BitDepth depth) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("write_png: unsupported channel count " + std::to_string(img.channels));
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng error writing " + path.string());
  }
  png_init_io(png, f.get());
  const int bits = static_cast<int>(depth);
  png_set_IHDR(png, info, img.width, img.height, bits,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const double maxv = bits == 16 ? 65535.0 : 255.0;
  const size_t row_values = static_cast<size_t>(img.width) * img.channels;
  std::vector<unsigned char> row(row_values * (bits / 8));
  for (int y = 0; y < img.height; ++y) {
    for (size_t i = 0; i < row_values; ++i) {
      const double v = std::clamp(img.data[y * row_values + i], 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * maxv));
      if (bits == 16) {
        row[2 * i] = static_cast<unsigned char>(q >> 8);
        row[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
      } else {
        row[i] = static_cast<unsigned char>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: cannot decode " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int bits = png_get_bit_depth(png, info);
  const int type = png_get_color_type(png, info);
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY && bits < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_bits = png_get_bit_depth(png, info);
  const double maxv = out_bits == 16 ? 65535.0 : 255.0;

  Image img(w, h, channels);
  std::vector<unsigned char> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int i = 0; i < w * channels; ++i) {
      const unsigned q = out_bits == 16 ? (row[2 * i] << 8) | row[2 * i + 1] : row[i];
      img.data[static_cast<size_t>(y) * w * channels + i] = q / maxv;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Image normalized_for_display(const Image& gray) {
  Image out = gray;
  const double m = gray.data.empty() ? 0.0 : *std::max_element(gray.data.begin(), gray.data.end());
  if (m > 0)
    for (double& v : out.data) v /= m;
  return out;
}

}  // namespace pvg4d
