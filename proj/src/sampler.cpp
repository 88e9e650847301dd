#include "isorec/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "isorec/error.hpp"
#include "isorec/parallel.hpp"

namespace isorec {

namespace {

void require_step_order(int t_from, int t_to, const NoiseSchedule& schedule, const char* where) {
    if (!(t_from > t_to && t_to >= 0 && t_from <= schedule.steps())) {
        throw InvalidArgument(std::string(where) + ": need t_from > t_to >= 0, got " + std::to_string(t_from) +
                              " -> " + std::to_string(t_to));
    }
}

Image2D clipped(Image2D img) {
    for (double& v : img.data()) v = std::clamp(v, -1.0, 1.0);
    return img;
}

}  // namespace

Image2D predict_x0(const Image2D& x_t, const Image2D& eps_hat, int t, const NoiseSchedule& schedule) {
    require_same_shape(x_t, eps_hat, "predict_x0");
    if (t < 1) throw InvalidArgument("predict_x0: t must be >= 1");
    const double ab = schedule.alpha_bar(t);
    const double inv = 1.0 / std::sqrt(ab);
    return axpby(inv, x_t, -std::sqrt(1.0 - ab) * inv, eps_hat);
}

Image2D ddpm_step(const Image2D& x_t, const Image2D& eps_hat, int t_from, int t_to, double sigma, const Image2D& z,
                  const NoiseSchedule& schedule, bool clip_x0) {
    require_step_order(t_from, t_to, schedule, "ddpm_step");
    require_same_shape(x_t, z, "ddpm_step");
    if (!(sigma >= 0.0)) throw InvalidArgument("ddpm_step: sigma must be non-negative");
    Image2D x0 = predict_x0(x_t, eps_hat, t_from, schedule);
    if (clip_x0) x0 = clipped(std::move(x0));

    const double ab_from = schedule.alpha_bar(t_from);
    const double ab_to = schedule.alpha_bar(t_to);
    const double step_beta = step_beta_between(schedule, t_from, t_to);
    const double step_alpha = 1.0 - step_beta;
    const double coef_x0 = std::sqrt(ab_to) * step_beta / (1.0 - ab_from);
    const double coef_xt = std::sqrt(step_alpha) * (1.0 - ab_to) / (1.0 - ab_from);

    Image2D out(x_t.height(), x_t.width());
    auto o = out.data();
    const auto a = x0.data();
    const auto b = x_t.data();
    const auto n = z.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = coef_x0 * a[i] + coef_xt * b[i] + sigma * n[i];
    return out;
}

Image2D ddim_step(const Image2D& x_t, const Image2D& eps_hat, int t_from, int t_to, double sigma, const Image2D& z,
                  const NoiseSchedule& schedule, bool clip_x0) {
    require_step_order(t_from, t_to, schedule, "ddim_step");
    require_same_shape(x_t, z, "ddim_step");
    if (!(sigma >= 0.0)) throw InvalidArgument("ddim_step: sigma must be non-negative");
    const double ab_from = schedule.alpha_bar(t_from);
    const double ab_to = schedule.alpha_bar(t_to);
    const double headroom = 1.0 - ab_to;
    double radicand = headroom - sigma * sigma;
    if (radicand < -1e-12 * std::max(headroom, 1e-300)) {
        throw InvalidArgument("ddim_step: sigma^2 exceeds 1 - alpha_bar at the target step");
    }
    radicand = std::max(radicand, 0.0);

    Image2D x0 = predict_x0(x_t, eps_hat, t_from, schedule);
    Image2D eps = eps_hat;
    if (clip_x0) {
        x0 = clipped(std::move(x0));
        eps = axpby(1.0 / std::sqrt(1.0 - ab_from), x_t, -std::sqrt(ab_from) / std::sqrt(1.0 - ab_from), x0);
    }
    Image2D out(x_t.height(), x_t.width());
    auto o = out.data();
    const auto a = x0.data();
    const auto e = eps.data();
    const auto n = z.data();
    const double c0 = std::sqrt(ab_to);
    const double ce = std::sqrt(radicand);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = c0 * a[i] + ce * e[i] + sigma * n[i];
    return out;
}

Image2D noise_condition(const Image2D& x_con_0, int t, const NoiseSchedule& schedule, const Image2D& z) {
    return q_sample(x_con_0, t, z, schedule);
}

Image2D sscs_compose(const Image2D& x_star, const Image2D& x_con_t, const Image2D& mask) {
    require_same_shape(x_star, x_con_t, "sscs_compose");
    require_same_shape(x_star, mask, "sscs_compose");
    Image2D out(x_star.height(), x_star.width());
    auto o = out.data();
    const auto s = x_star.data();
    const auto c = x_con_t.data();
    const auto m = mask.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (m[i] == 1.0) {
            o[i] = c[i];
        } else if (m[i] == 0.0) {
            o[i] = s[i];
        } else {
            throw InvalidArgument("sscs_compose: mask must be binary");
        }
    }
    return out;
}

Image2D renoise(const Image2D& x_prev, int t, const NoiseSchedule& schedule, const Image2D& z) {
    require_same_shape(x_prev, z, "renoise");
    if (t < 1 || t > schedule.steps()) throw InvalidArgument("renoise: t outside 1..T");
    const double beta = schedule.beta(t);
    return axpby(std::sqrt(1.0 - beta), x_prev, std::sqrt(beta), z);
}

Image2D renoise_between(const Image2D& x, int t_to, int t_from, const NoiseSchedule& schedule, const Image2D& z) {
    require_same_shape(x, z, "renoise_between");
    require_step_order(t_from, t_to, schedule, "renoise_between");
    const double step_beta = step_beta_between(schedule, t_from, t_to);
    return axpby(std::sqrt(1.0 - step_beta), x, std::sqrt(step_beta), z);
}

void SamplerConfig::validate(const NoiseSchedule& schedule) const {
    isorec::validate(plan, schedule);
    if (sscs_period < 1) throw InvalidArgument("sampler: sscs period must be >= 1");
    if (sigma_mode.kind == SigmaMode::Kind::ddim_eta && !(sigma_mode.eta >= 0.0 && sigma_mode.eta <= 1.0)) {
        throw InvalidArgument("sampler: ddim eta must lie in [0, 1]");
    }
}

Image2D reconstruct_slice(const Image2D& x_axi, int alpha, const Denoiser& model, const NoiseSchedule& schedule,
                          const SamplerConfig& cfg, RandomSource& rng, SliceStats* stats) {
    cfg.validate(schedule);
    const ConditionPair cond = pad_axial(x_axi, alpha);
    const std::size_t h = cond.x_con_0.height();
    const std::size_t w = cond.x_con_0.width();
    const bool use_ddim = cfg.sigma_mode.kind == SigmaMode::Kind::ddim_eta;
    const Image2D zeros(h, w, 0.0);
    const auto& steps = cfg.plan.steps;
    const int refine = cfg.plan.refine;

    Image2D x = gaussian_noise(rng, h, w);
    Image2D x_prev = x;
    for (std::size_t j = 0; j < steps.size(); ++j) {
        const int t_from = steps[j];
        const int t_to = cfg.plan.target_of(j);
        const bool last = j + 1 == steps.size();
        const bool compose = j % static_cast<std::size_t>(cfg.sscs_period) == 0;
        const double sig = sigma(schedule, cfg.sigma_mode, t_from, t_to);
        const Image2D x_con_t = noise_condition(cond.x_con_0, t_to, schedule, gaussian_noise(rng, h, w));

        for (int i = 1; i <= refine; ++i) {
            const Image2D eps = model.predict_noise(x, t_from, schedule);
            if (stats != nullptr) ++stats->denoiser_calls;
            const Image2D z = last ? zeros : gaussian_noise(rng, h, w);
            Image2D x_star = use_ddim ? ddim_step(x, eps, t_from, t_to, sig, z, schedule, cfg.clip_x0)
                                      : ddpm_step(x, eps, t_from, t_to, sig, z, schedule, cfg.clip_x0);
            x_prev = compose ? sscs_compose(x_star, x_con_t, cond.mask) : std::move(x_star);
            if (!all_finite(x_prev.data())) throw SamplingFailure(t_from, i, "non-finite sample");
            if (!last && i < refine) x = renoise_between(x_prev, t_to, t_from, schedule, gaussian_noise(rng, h, w));
        }
        x = x_prev;
    }

    if (cfg.final_clamp) {
        const auto a = static_cast<std::size_t>(alpha);
        for (std::size_t k = 0; k < x_axi.height(); ++k) {
            auto src = x_axi.row(k);
            std::copy(src.begin(), src.end(), x.row(k * a).begin());
        }
    }
    return x;
}

Image2D reconstruct_slice(const Image2D& x_axi, int alpha, const Denoiser& model, const NoiseSchedule& schedule,
                          const SamplerConfig& cfg) {
    RandomSource rng(cfg.seed, 0);
    return reconstruct_slice(x_axi, alpha, model, schedule, cfg, rng);
}

AxisSet parse_axis_set(const std::string& text) {
    if (text == "xz") return AxisSet::xz;
    if (text == "yz") return AxisSet::yz;
    if (text == "both") return AxisSet::both;
    throw InvalidArgument("unknown axis '" + text + "' (expected xz, yz or both)");
}

std::string to_string(AxisSet axes) {
    switch (axes) {
        case AxisSet::xz: return "xz";
        case AxisSet::yz: return "yz";
        case AxisSet::both: return "both";
    }
    return "?";
}

std::uint64_t plane_stream(AxialPlane plane, std::size_t index) noexcept {
    return (static_cast<std::uint64_t>(plane == AxialPlane::xz ? 1 : 2) << 40) | static_cast<std::uint64_t>(index);
}

VolumeReconstruction reconstruct_volume(const Volume3D& vol, int alpha, const Denoiser& model,
                                        const NoiseSchedule& schedule, const SamplerConfig& cfg,
                                        const VolumeOptions& options) {
    cfg.validate(schedule);
    if (alpha < 1) throw InvalidArgument("reconstruct_volume: alpha must be >= 1");
    require_finite(vol, "reconstruct_volume");
    const auto started = std::chrono::steady_clock::now();

    std::vector<AxialPlane> planes;
    if (options.axes != AxisSet::yz) planes.push_back(AxialPlane::xz);
    if (options.axes != AxisSet::xz) planes.push_back(AxialPlane::yz);

    const std::size_t out_depth = vol.depth() * static_cast<std::size_t>(alpha);
    std::vector<Volume3D> results;
    long calls = 0;
    std::size_t plane_total = 0;
    for (AxialPlane plane : planes) {
        const std::size_t count = plane_count(vol, plane);
        std::vector<std::size_t> order = options.plane_order;
        if (order.empty()) {
            order.resize(count);
            std::iota(order.begin(), order.end(), std::size_t{0});
        }
        std::vector<std::size_t> check = order;
        std::sort(check.begin(), check.end());
        for (std::size_t i = 0; i < check.size(); ++i) {
            if (check[i] != i || check.size() != count) {
                throw InvalidArgument("reconstruct_volume: plane order must be a permutation of 0.." +
                                      std::to_string(count - 1));
            }
        }

        std::vector<Image2D> slices(count);
        std::vector<long> slice_calls(count, 0);
        parallel_for(count, options.threads, [&](std::size_t k) {
            const std::size_t index = order[k];
            RandomSource rng(cfg.seed, plane_stream(plane, index));
            SliceStats stats;
            try {
                slices[index] = reconstruct_slice(extract_axial_slice(vol, plane, index), alpha, model, schedule,
                                                  cfg, rng, &stats);
            } catch (const SamplingFailure& e) {
                throw SamplingFailure(e.timestep(), e.refine(),
                                      std::string(to_string(plane)) + " plane " + std::to_string(index) + ": " +
                                          e.what());
            }
            slice_calls[index] = stats.denoiser_calls;
        });

        Volume3D assembled(out_depth, vol.height(), vol.width());
        for (std::size_t index = 0; index < count; ++index) write_axial_slice(assembled, plane, index, slices[index]);
        calls = std::accumulate(slice_calls.begin(), slice_calls.end(), calls);
        plane_total += count;
        results.push_back(std::move(assembled));
    }

    Volume3D out = std::move(results.front());
    if (results.size() == 2) {
        auto o = out.data();
        const auto other = results[1].data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = 0.5 * (o[i] + other[i]);
    }

    ReconstructionReport report;
    report.alpha = alpha;
    report.axes = to_string(options.axes);
    report.model_kind = model.kind();
    report.plan_steps = cfg.plan.steps;
    report.refine = cfg.plan.refine;
    report.total_steps_per_slice = cfg.plan.total_steps();
    report.sigma_mode = cfg.sigma_mode.to_string();
    report.sscs_period = cfg.sscs_period;
    report.final_clamp = cfg.final_clamp;
    report.clip_x0 = cfg.clip_x0;
    report.seed = cfg.seed;
    report.planes = plane_total;
    report.denoiser_calls = calls;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.input_dims = {vol.depth(), vol.height(), vol.width()};
    report.output_dims = {out.depth(), out.height(), out.width()};
    return {std::move(out), std::move(report)};
}

}  // namespace isorec
