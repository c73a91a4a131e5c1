#pragma once

#include "pags/common.hpp"

#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace pags {

constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over two RGB images in [0,1] (H*W*3). Identical images
/// report kPsnrCap. Throws DimensionError on size mismatch.
double psnr(std::span<const double> a, std::span<const double> b);

/// PSNR restricted to pixels where mask != 0 (mask is H*W). nullopt when the
/// mask selects no pixel.
std::optional<double> masked_psnr(std::span<const double> a, std::span<const double> b,
                                  std::span<const std::uint8_t> mask);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean local SSIM over all valid window positions and the three channels.
/// Throws DimensionError when the image is smaller than the window.
double ssim(std::span<const double> a, std::span<const double> b, int width, int height,
            const SsimOptions& options = {});

/// SSIM and its gradient with respect to `a` (written to grad_a, H*W*3).
double ssim_with_grad(std::span<const double> a, std::span<const double> b, int width, int height,
                      std::span<double> grad_a, const SsimOptions& options = {});

struct PhotometricLoss {
    double value = 0.0;
    double l1 = 0.0;
    double ssim = 0.0;
    std::vector<double> grad;  ///< dL/d rendered, H*W*3
};

/// (1 - lambda) * L1 + lambda * (1 - SSIM) with lambda = 0.2.
PhotometricLoss photometric_loss(std::span<const double> rendered, std::span<const double> target, int width,
                                 int height, double lambda = 0.2);

struct MetricsReport {
    double psnr_global = 0.0;
    std::optional<double> psnr_critical;     ///< absent when no pixel is critical
    std::optional<double> psnr_noncritical;  ///< absent when every pixel is critical
    std::optional<double> ssim;              ///< absent for images smaller than the window
    std::size_t pixels_global = 0;
    std::size_t pixels_critical = 0;
    std::size_t pixels_noncritical = 0;
    std::optional<std::size_t> gaussian_count;
    std::optional<double> fps_equivalent;  ///< 1000 / mean frame ms
    std::optional<double> train_time_s;
};

/// Global and mask-split metrics of `rendered` against `target`. An empty
/// `critical` mask treats every pixel as non-critical.
MetricsReport compare_images(std::span<const double> rendered, std::span<const double> target, int width,
                             int height, std::span<const std::uint8_t> critical = {});

/// One `key=value` line; absent values are written as `absent`.
void write_metrics_report(std::ostream& os, const MetricsReport& r);

}  // namespace pags
