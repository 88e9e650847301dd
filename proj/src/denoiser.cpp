#include "isorec/denoiser.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "isorec/error.hpp"
#include "isorec/random.hpp"

namespace isorec {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const MatrixRM> covariance_view(const GaussianDataSpec& spec) {
    const auto d = static_cast<Eigen::Index>(spec.pixels());
    return Eigen::Map<const MatrixRM>(spec.covariance->data(), d, d);
}

}  // namespace

Image2D q_sample(const Image2D& x0, int t, const Image2D& noise, const NoiseSchedule& schedule) {
    require_same_shape(x0, noise, "q_sample");
    require_finite(x0, "q_sample");
    require_finite(noise, "q_sample");
    const double ab = schedule.alpha_bar(t);
    return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), noise);
}

GaussianDataSpec GaussianDataSpec::diagonal(std::size_t height, std::size_t width, std::vector<double> mean,
                                            std::vector<double> variance) {
    GaussianDataSpec spec;
    spec.height = height;
    spec.width = width;
    spec.mean = std::move(mean);
    spec.variance = std::move(variance);
    spec.validate();
    return spec;
}

GaussianDataSpec GaussianDataSpec::full(std::size_t height, std::size_t width, std::vector<double> mean,
                                        std::vector<double> covariance) {
    GaussianDataSpec spec;
    spec.height = height;
    spec.width = width;
    spec.mean = std::move(mean);
    spec.covariance = std::move(covariance);
    spec.validate();
    return spec;
}

GaussianDataSpec GaussianDataSpec::as_full() const {
    if (is_full()) return *this;
    const std::size_t d = pixels();
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = variance[i];
    return full(height, width, mean, std::move(cov));
}

void GaussianDataSpec::validate() const {
    const std::size_t d = pixels();
    if (d == 0) throw InvalidArgument("gaussian spec: empty shape");
    if (mean.size() != d) throw InvalidArgument("gaussian spec: mean length does not match the shape");
    if (!all_finite(mean)) throw InvalidArgument("gaussian spec: non-finite mean");
    if (!is_full()) {
        if (variance.size() != d) throw InvalidArgument("gaussian spec: variance length does not match the shape");
        for (double v : variance) {
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("gaussian spec: variances must be positive");
        }
        return;
    }
    if (d > kMaxFullPixels) {
        throw InvalidArgument("gaussian spec: full covariance limited to " + std::to_string(kMaxFullPixels) +
                              " pixels, got " + std::to_string(d));
    }
    if (covariance->size() != d * d) throw InvalidArgument("gaussian spec: covariance must be d x d");
    if (!all_finite(*covariance)) throw InvalidArgument("gaussian spec: non-finite covariance");
    const auto cov = covariance_view(*this);
    if (!cov.isApprox(cov.transpose(), 1e-12)) throw InvalidArgument("gaussian spec: covariance not symmetric");
    Eigen::LLT<MatrixRM> llt(cov);
    if (llt.info() != Eigen::Success) throw InvalidArgument("gaussian spec: covariance not positive-definite");
}

GaussianDataSpec ar1_column_spec(std::size_t height, std::size_t width, double rho) {
    if (!(rho > -1.0 && rho < 1.0)) throw InvalidArgument("ar1_column_spec: |rho| must be < 1");
    const std::size_t d = height * width;
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t r1 = 0; r1 < height; ++r1) {
        for (std::size_t r2 = 0; r2 < height; ++r2) {
            const double c = std::pow(rho, static_cast<double>(r1 > r2 ? r1 - r2 : r2 - r1));
            for (std::size_t c0 = 0; c0 < width; ++c0) cov[(r1 * width + c0) * d + r2 * width + c0] = c;
        }
    }
    return GaussianDataSpec::full(height, width, std::vector<double>(d, 0.0), std::move(cov));
}

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(GaussianDataSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

Image2D AnalyticGaussianDenoiser::posterior_mean(const Image2D& x_t, int t, const NoiseSchedule& schedule) const {
    if (x_t.height() != spec_.height || x_t.width() != spec_.width) {
        throw InvalidArgument("analytic denoiser: input shape does not match the data spec");
    }
    require_finite(x_t, "analytic denoiser");
    if (t < 1) throw InvalidArgument("analytic denoiser: t must be >= 1");
    const double ab = schedule.alpha_bar(t);
    const double sab = std::sqrt(ab);
    const std::size_t d = spec_.pixels();
    const auto xs = x_t.data();

    Image2D out(spec_.height, spec_.width);
    auto o = out.data();
    if (!spec_.is_full()) {
        for (std::size_t i = 0; i < d; ++i) {
            const double v = spec_.variance[i];
            o[i] = spec_.mean[i] + sab * v / (ab * v + (1.0 - ab)) * (xs[i] - sab * spec_.mean[i]);
        }
        return out;
    }
    const auto n = static_cast<Eigen::Index>(d);
    const auto cov = covariance_view(spec_);
    MatrixRM system = ab * cov;
    system.diagonal().array() += 1.0 - ab;
    Eigen::VectorXd residual(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        residual[i] = xs[static_cast<std::size_t>(i)] - sab * spec_.mean[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd solved = system.llt().solve(residual);
    const Eigen::VectorXd shift = sab * (cov * solved);
    for (std::size_t i = 0; i < d; ++i) o[i] = spec_.mean[i] + shift[static_cast<Eigen::Index>(i)];
    return out;
}

Image2D AnalyticGaussianDenoiser::predict_noise(const Image2D& x_t, int t, const NoiseSchedule& schedule) const {
    const Image2D x0_mean = posterior_mean(x_t, t, schedule);
    const double ab = schedule.alpha_bar(t);
    const double inv = 1.0 / std::sqrt(1.0 - ab);
    return axpby(inv, x_t, -std::sqrt(ab) * inv, x0_mean);
}

Image2D sample_gaussian(const GaussianDataSpec& spec, RandomSource& rng) {
    spec.validate();
    Image2D out(spec.height, spec.width);
    auto o = out.data();
    const std::size_t d = spec.pixels();
    if (!spec.is_full()) {
        for (std::size_t i = 0; i < d; ++i) o[i] = spec.mean[i] + std::sqrt(spec.variance[i]) * rng.normal();
        return out;
    }
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    const MatrixRM lower = covariance_view(spec).llt().matrixL();
    const Eigen::VectorXd draw = lower * z;
    for (std::size_t i = 0; i < d; ++i) o[i] = spec.mean[i] + draw[static_cast<Eigen::Index>(i)];
    return out;
}

std::unique_ptr<Denoiser> make_analytic_gaussian_denoiser(GaussianDataSpec spec) {
    return std::make_unique<AnalyticGaussianDenoiser>(std::move(spec));
}

}  // namespace isorec
