#include "pvg4d/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace pvg4d {

namespace {

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kRadius + 1>& window() {
  static const auto w = [] {
    std::array<double, 2 * kRadius + 1> k{};
    double s = 0;
    for (int i = -kRadius; i <= kRadius; ++i) s += k[i + kRadius] = std::exp(-0.5 * i * i / (1.5 * 1.5));
    for (double& v : k) v /= s;
    return k;
  }();
  return w;
}

/// Separable Gaussian filter of one plane with zero padding. The kernel is
/// symmetric, so this is also its own adjoint.
std::vector<double> filter(const std::vector<double>& src, int w, int h) {
  const auto& k = window();
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) acc += k[i + kRadius] * src[y * w + xx];
      }
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) acc += k[i + kRadius] * tmp[yy * w + x];
      }
      out[y * w + x] = acc;
    }
  return out;
}

std::vector<double> plane(const Image& img, int c) {
  std::vector<double> p(img.pixel_count());
  for (size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
  return p;
}

struct Moments {
  std::vector<double> mx, my, sxx, syy, sxy;
};

Moments moments(const std::vector<double>& x, const std::vector<double>& y, int w, int h) {
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  Moments m{filter(x, w, h), filter(y, w, h), filter(xx, w, h), filter(yy, w, h), filter(xy, w, h)};
  for (size_t i = 0; i < x.size(); ++i) {
    m.sxx[i] -= m.mx[i] * m.mx[i];
    m.syy[i] -= m.my[i] * m.my[i];
    m.sxy[i] -= m.mx[i] * m.my[i];
  }
  return m;
}

double ssim_at(const Moments& m, size_t i) {
  const double a = 2 * m.mx[i] * m.my[i] + kC1, b = 2 * m.sxy[i] + kC2;
  const double c = m.mx[i] * m.mx[i] + m.my[i] * m.my[i] + kC1, d = m.sxx[i] + m.syy[i] + kC2;
  return a * b / (c * d);
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double se = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  if (se == 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(se / static_cast<double>(a.data.size())));
}

double ssim(const Image& a, const Image& b) { return ssim_with_grad(a, b, nullptr); }

double ssim_with_grad(const Image& a, const Image& b, Image* grad_a) {
  require_same_shape(a, b, "ssim");
  const int w = a.width, h = a.height;
  const size_t n = a.pixel_count();
  const double inv = 1.0 / static_cast<double>(n * a.channels);
  if (grad_a) *grad_a = Image(w, h, a.channels);
  double total = 0;
  for (int c = 0; c < a.channels; ++c) {
    const std::vector<double> x = plane(a, c), y = plane(b, c);
    const Moments m = moments(x, y, w, h);
    for (size_t i = 0; i < n; ++i) total += ssim_at(m, i);
    if (!grad_a) continue;

    // Per-pixel partials of the SSIM map with respect to the filtered
    // statistics E[x], E[x^2] and E[xy], then the adjoint of the filter.
    std::vector<double> g_mx(n), g_exx(n), g_exy(n);
    for (size_t i = 0; i < n; ++i) {
      const double mx = m.mx[i], my = m.my[i];
      const double a1 = 2 * mx * my + kC1, b1 = 2 * m.sxy[i] + kC2;
      const double c1 = mx * mx + my * my + kC1, d1 = m.sxx[i] + m.syy[i] + kC2;
      const double s = a1 * b1 / (c1 * d1);
      const double ds_dmx = s * (2 * my / a1 - 2 * mx / c1);
      const double ds_dsxx = -s / d1;
      const double ds_dsxy = s * 2 / b1;
      g_exx[i] = ds_dsxx * inv;
      g_exy[i] = ds_dsxy * inv;
      g_mx[i] = (ds_dmx - 2 * mx * ds_dsxx - my * ds_dsxy) * inv;
    }
    const std::vector<double> f_mx = filter(g_mx, w, h), f_exx = filter(g_exx, w, h),
                              f_exy = filter(g_exy, w, h);
    for (size_t i = 0; i < n; ++i)
      grad_a->data[i * a.channels + c] = f_mx[i] + 2 * x[i] * f_exx[i] + y[i] * f_exy[i];
  }
  return total * inv;
}

double gm_ssim_proxy(const Image& a, const Image& b) {
  require_same_shape(a, b, "gm_ssim_proxy");
  const int w = a.width, h = a.height;
  const size_t n = a.pixel_count();
  std::vector<double> lum(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < b.channels; ++c) lum[i] += b.data[i * b.channels + c] / b.channels;
  auto at = [&](int x, int y) { return lum[std::clamp(y, 0, h - 1) * w + std::clamp(x, 0, w - 1)]; };
  std::vector<double> weight(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1) - at(x - 1, y - 1) -
                        2 * at(x - 1, y) - at(x - 1, y + 1);
      const double gy = at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1) - at(x - 1, y - 1) -
                        2 * at(x, y - 1) - at(x + 1, y - 1);
      weight[y * w + x] = std::sqrt(gx * gx + gy * gy) + 0.01;
    }
  double num = 0, den = 0;
  for (int c = 0; c < a.channels; ++c) {
    const Moments m = moments(plane(a, c), plane(b, c), w, h);
    for (size_t i = 0; i < n; ++i) {
      num += weight[i] * ssim_at(m, i);
      den += weight[i];
    }
  }
  return num / den;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace pvg4d
