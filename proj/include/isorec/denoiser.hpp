#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isorec/grid.hpp"
#include "isorec/schedule.hpp"

namespace isorec {

/// Noise-prediction model: estimates the noise injected into x_t at level t.
/// Implementations are pure functions of (x_t, t, parameters) and safe to call
/// concurrently.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual Image2D predict_noise(const Image2D& x_t, int t, const NoiseSchedule& schedule) const = 0;
    virtual std::string kind() const = 0;
};

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise.
Image2D q_sample(const Image2D& x0, int t, const Image2D& noise, const NoiseSchedule& schedule);

/// Gaussian data distribution over the pixels of a fixed-shape image.
/// Either diagonal (per-pixel variance) or a full covariance over at most
/// kMaxFullPixels pixels, row-major pixel order.
struct GaussianDataSpec {
    static constexpr std::size_t kMaxFullPixels = 256;

    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> mean;
    std::vector<double> variance;                   // diagonal form
    std::optional<std::vector<double>> covariance;  // full form, d*d row-major

    std::size_t pixels() const noexcept { return height * width; }
    bool is_full() const noexcept { return covariance.has_value(); }

    static GaussianDataSpec diagonal(std::size_t height, std::size_t width, std::vector<double> mean,
                                     std::vector<double> variance);
    static GaussianDataSpec full(std::size_t height, std::size_t width, std::vector<double> mean,
                                 std::vector<double> covariance);

    /// Same distribution expressed through a full covariance matrix.
    GaussianDataSpec as_full() const;
    void validate() const;
};

/// Columns of an h x w image, each an independent zero-mean AR(1) sequence
/// along the rows: cov(r, r') = rho^|r - r'|. Its precision matrix is tridiagonal.
GaussianDataSpec ar1_column_spec(std::size_t height, std::size_t width, double rho);

/// Exact MMSE noise predictor for Gaussian data.
class AnalyticGaussianDenoiser final : public Denoiser {
public:
    explicit AnalyticGaussianDenoiser(GaussianDataSpec spec);

    Image2D predict_noise(const Image2D& x_t, int t, const NoiseSchedule& schedule) const override;
    std::string kind() const override { return "analytic_gaussian"; }

    /// E[x0 | x_t] under the data distribution.
    Image2D posterior_mean(const Image2D& x_t, int t, const NoiseSchedule& schedule) const;

    const GaussianDataSpec& spec() const noexcept { return spec_; }

private:
    GaussianDataSpec spec_;
};

/// Draws x0 from a Gaussian spec.
class RandomSource;
Image2D sample_gaussian(const GaussianDataSpec& spec, RandomSource& rng);

std::unique_ptr<Denoiser> make_analytic_gaussian_denoiser(GaussianDataSpec spec);

}  // namespace isorec
