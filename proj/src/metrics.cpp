#include "isorec/metrics.hpp"

#include <cmath>
#include <sstream>

#include "isorec/error.hpp"

namespace isorec {

double psnr(std::span<const double> x, std::span<const double> y, double max_value) {
    if (x.size() != y.size() || x.empty()) throw InvalidArgument("psnr: shape mismatch");
    if (!(max_value > 0.0)) throw InvalidArgument("psnr: max_value must be positive");
    if (!all_finite(x) || !all_finite(y)) throw InvalidArgument("psnr: non-finite input");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    if (sum == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = sum / static_cast<double>(x.size());
    return 10.0 * std::log10(max_value * max_value / mse);
}

double psnr(const Image2D& x, const Image2D& y, double max_value) {
    require_same_shape(x, y, "psnr");
    return psnr(x.data(), y.data(), max_value);
}

double psnr(const Volume3D& x, const Volume3D& y, double max_value) {
    if (!x.same_shape(y)) throw InvalidArgument("psnr: volume shape mismatch");
    return psnr(x.data(), y.data(), max_value);
}

std::vector<double> gaussian_taps(int window, double sigma) {
    if (window < 1 || !(sigma > 0.0)) throw InvalidArgument("gaussian window needs size >= 1 and sigma > 0");
    std::vector<double> taps(static_cast<std::size_t>(window));
    const double center = (window - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < window; ++i) {
        const double d = i - center;
        taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += taps[static_cast<std::size_t>(i)];
    }
    for (double& v : taps) v /= total;
    return taps;
}

namespace {

// Separable weighted sum over every valid window position.
Image2D window_filter(const Image2D& img, const std::vector<double>& taps) {
    const std::size_t k = taps.size();
    const std::size_t oh = img.height() - k + 1;
    const std::size_t ow = img.width() - k + 1;
    Image2D rows(img.height(), ow);
    for (std::size_t r = 0; r < img.height(); ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += taps[j] * img(r, c + j);
            rows(r, c) = acc;
        }
    }
    Image2D out(oh, ow);
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += taps[j] * rows(r + j, c);
            out(r, c) = acc;
        }
    }
    return out;
}

Image2D product(const Image2D& a, const Image2D& b) {
    Image2D out(a.height(), a.width());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

}  // namespace

double ssim(const Image2D& x, const Image2D& y, double max_value, const SsimOptions& opts) {
    require_same_shape(x, y, "ssim");
    require_finite(x, "ssim");
    require_finite(y, "ssim");
    if (!(max_value > 0.0)) throw InvalidArgument("ssim: max_value must be positive");
    const auto win = static_cast<std::size_t>(opts.window);
    if (opts.window < 1 || x.height() < win || x.width() < win) {
        throw InvalidArgument("ssim: image smaller than the " + std::to_string(opts.window) + "px window");
    }
    const auto taps = gaussian_taps(opts.window, opts.gaussian_sigma);
    const double c1 = (opts.k1 * max_value) * (opts.k1 * max_value);
    const double c2 = (opts.k2 * max_value) * (opts.k2 * max_value);

    const Image2D mu_x = window_filter(x, taps);
    const Image2D mu_y = window_filter(y, taps);
    const Image2D e_xx = window_filter(product(x, x), taps);
    const Image2D e_yy = window_filter(product(y, y), taps);
    const Image2D e_xy = window_filter(product(x, y), taps);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x.data()[i];
        const double my = mu_y.data()[i];
        const double vx = e_xx.data()[i] - mx * mx;
        const double vy = e_yy.data()[i] - my * my;
        const double cxy = e_xy.data()[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mu_x.size());
}

Image2D to_8bit_levels(const Image2D& img) {
    Image2D out(img.height(), img.width());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<double>(to_u8(img.data()[i]));
    return out;
}

MetricReport evaluate_volume(const Volume3D& recon, const Volume3D& truth, AxialPlane plane, double max_value,
                             bool eight_bit, const SsimOptions& opts) {
    if (!recon.same_shape(truth)) throw InvalidArgument("evaluate: reconstruction and truth differ in shape");
    MetricReport report;
    std::vector<double> all_x;
    std::vector<double> all_y;
    all_x.reserve(recon.size());
    all_y.reserve(recon.size());
    double ssim_sum = 0.0;
    for (std::size_t i = 0; i < plane_count(recon, plane); ++i) {
        Image2D a = extract_axial_slice(recon, plane, i);
        Image2D b = extract_axial_slice(truth, plane, i);
        if (eight_bit) {
            a = to_8bit_levels(a);
            b = to_8bit_levels(b);
        }
        SliceMetric m;
        m.slice_id = i;
        m.axis = std::string(to_string(plane));
        m.psnr_db = psnr(a, b, max_value);
        m.ssim = ssim(a, b, max_value, opts);
        ssim_sum += m.ssim;
        all_x.insert(all_x.end(), a.data().begin(), a.data().end());
        all_y.insert(all_y.end(), b.data().begin(), b.data().end());
        report.slices.push_back(std::move(m));
    }
    report.psnr_db = psnr(all_x, all_y, max_value);
    report.ssim = ssim_sum / static_cast<double>(report.slices.size());
    return report;
}

std::string metrics_csv(const MetricReport& report) {
    std::ostringstream out;
    out.precision(10);
    out << "slice_id,axis,psnr_db,ssim\n";
    for (const auto& m : report.slices) {
        out << m.slice_id << ',' << m.axis << ',';
        if (std::isinf(m.psnr_db)) {
            out << "inf";
        } else {
            out << m.psnr_db;
        }
        out << ',' << m.ssim << '\n';
    }
    return out.str();
}

}  // namespace isorec
