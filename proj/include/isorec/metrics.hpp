#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "isorec/grid.hpp"

namespace isorec {

/// 10 log10(max^2 / MSE); +infinity when the inputs are identical.
double psnr(std::span<const double> x, std::span<const double> y, double max_value);
double psnr(const Image2D& x, const Image2D& y, double max_value);
double psnr(const Volume3D& x, const Volume3D& y, double max_value);

struct SsimOptions {
    int window = 11;
    double gaussian_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean local SSIM over every valid window position, with Gaussian-weighted
/// window statistics and stabilizers (k1 max)^2, (k2 max)^2.
double ssim(const Image2D& x, const Image2D& y, double max_value, const SsimOptions& opts = {});

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
std::vector<double> gaussian_taps(int window, double sigma);

/// Canonical [-1, 1] values mapped to 8-bit levels 0..255 (as reals).
Image2D to_8bit_levels(const Image2D& img);

struct SliceMetric {
    std::size_t slice_id = 0;
    std::string axis;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    double psnr_db = 0.0;  // over the whole volume
    double ssim = 0.0;     // mean of per-slice values
    std::vector<SliceMetric> slices;
};

/// Per-slice metrics over the chosen planes of two equally shaped volumes.
/// With `eight_bit` both volumes are quantized to 8-bit levels first and
/// max_value should be 255.
MetricReport evaluate_volume(const Volume3D& recon, const Volume3D& truth, AxialPlane plane, double max_value,
                             bool eight_bit, const SsimOptions& opts = {});

/// CSV with header slice_id,axis,psnr_db,ssim. Infinite PSNR prints as "inf".
std::string metrics_csv(const MetricReport& report);

}  // namespace isorec
