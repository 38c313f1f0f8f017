#pragma once

#include "pvg4d/image.hpp"

#include <vector>

namespace pvg4d {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE); identical images report kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over pixels and channels with an 11x11 Gaussian window
/// (sigma 1.5), k1 = 0.01, k2 = 0.03, zero padding at the borders.
double ssim(const Image& a, const Image& b);

/// SSIM and its gradient with respect to `a`.
double ssim_with_grad(const Image& a, const Image& b, Image* grad_a);

/// Gradient-magnitude-weighted SSIM: the SSIM map averaged with weights
/// |Sobel(b)| + 0.01 over luminance. A perceptual proxy, not LPIPS.
double gm_ssim_proxy(const Image& a, const Image& b);

/// Pearson correlation; 0 for degenerate inputs.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pvg4d
