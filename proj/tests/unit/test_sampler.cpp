#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "isorec/error.hpp"
#include "isorec/sampler.hpp"
#include "support/test_models.hpp"

using namespace isorec;
using isorec::testing::IidGaussianPrior;
using isorec::testing::NanModel;
using isorec::testing::PointMass;

namespace {

const NoiseSchedule& schedule() {
    static const NoiseSchedule s = linear_schedule();
    return s;
}

double max_abs_diff(const Image2D& a, const Image2D& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

Image2D clip(Image2D x) {
    for (double& v : x.data()) v = std::clamp(v, -1.0, 1.0);
    return x;
}

// K = 1, compose every step, posterior sigma; written out without the library's step functions.
Image2D straight_line_sampler(const Image2D& x_axi, int alpha, const Denoiser& model, const std::vector<int>& steps,
                              RandomSource& rng) {
    const NoiseSchedule& s = schedule();
    const std::size_t h = x_axi.height() * static_cast<std::size_t>(alpha), w = x_axi.width();
    Image2D cond(h, w, 0.0);
    for (std::size_t k = 0; k < x_axi.height(); ++k) {
        for (std::size_t c = 0; c < w; ++c) cond(k * static_cast<std::size_t>(alpha), c) = x_axi(k, c);
    }
    Image2D x = gaussian_noise(rng, h, w);
    for (std::size_t j = 0; j < steps.size(); ++j) {
        const int a = steps[j];
        const int b = j + 1 < steps.size() ? steps[j + 1] : 0;
        const double ab_a = s.alpha_bar(a), ab_b = s.alpha_bar(b);
        const Image2D zc = gaussian_noise(rng, h, w);
        const Image2D eps = model.predict_noise(x, a, s);
        const bool last = j + 1 == steps.size();
        const Image2D z = last ? Image2D(h, w, 0.0) : gaussian_noise(rng, h, w);
        const double beta_ab = 1.0 - ab_a / ab_b;
        const double var = (1.0 - ab_b) / (1.0 - ab_a) * beta_ab;
        Image2D next(h, w);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                if (r % static_cast<std::size_t>(alpha) == 0) {
                    next(r, c) = std::sqrt(ab_b) * cond(r, c) + std::sqrt(1.0 - ab_b) * zc(r, c);
                    continue;
                }
                double x0 = (x(r, c) - std::sqrt(1.0 - ab_a) * eps(r, c)) / std::sqrt(ab_a);
                x0 = std::clamp(x0, -1.0, 1.0);
                const double mean = (std::sqrt(ab_b) * beta_ab * x0 +
                                     std::sqrt(1.0 - beta_ab) * (1.0 - ab_b) * x(r, c)) / (1.0 - ab_a);
                next(r, c) = mean + std::sqrt(var) * z(r, c);
            }
        }
        x = next;
    }
    for (std::size_t k = 0; k < x_axi.height(); ++k) {
        for (std::size_t c = 0; c < w; ++c) x(k * static_cast<std::size_t>(alpha), c) = x_axi(k, c);
    }
    return x;
}

SamplerConfig small_config(int steps, int refine) {
    SamplerConfig cfg;
    cfg.plan = uniform_subsequence(1000, steps, refine);
    return cfg;
}

}  // namespace

TEST_CASE("predict_x0") {
    RandomSource rng(1, 0);
    const Image2D x_t = gaussian_noise(rng, 4, 5);
    SUBCASE("zero noise estimate divides by sqrt(alpha_bar)") {
        const Image2D out = predict_x0(x_t, Image2D(4, 5, 0.0), 300, schedule());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(std::abs(out.data()[i] - x_t.data()[i] / std::sqrt(schedule().alpha_bar(300))) < 1e-14);
        }
    }
    SUBCASE("inverts q_sample") {
        const Image2D x0 = gaussian_noise(rng, 4, 5);
        const Image2D eps = gaussian_noise(rng, 4, 5);
        for (int t : {1, 10, 500, 999, 1000}) {
            CHECK(max_abs_diff(predict_x0(q_sample(x0, t, eps, schedule()), eps, t, schedule()), x0) < 1e-10);
        }
    }
    SUBCASE("extended precision recomputation") {
        for (int trial = 0; trial < 50; ++trial) {
            const int t = 1 + static_cast<int>(rng.uniform_index(1000));
            const Image2D eps = gaussian_noise(rng, 4, 5);
            const Image2D out = predict_x0(x_t, eps, t, schedule());
            long double ab = 1.0L;
            for (int s = 1; s <= t; ++s) ab *= 1.0L - static_cast<long double>(schedule().beta(s));
            for (std::size_t i = 0; i < out.size(); ++i) {
                const long double ref = (static_cast<long double>(x_t.data()[i]) -
                                         std::sqrt(1.0L - ab) * static_cast<long double>(eps.data()[i])) /
                                        std::sqrt(ab);
                CHECK(std::abs(static_cast<long double>(out.data()[i]) - ref) <= 1e-9L * (1.0L + std::abs(ref)));
            }
        }
    }
    CHECK_THROWS_AS(predict_x0(x_t, Image2D(4, 4), 3, schedule()), InvalidArgument);
    CHECK_THROWS_AS(predict_x0(x_t, x_t, 0, schedule()), InvalidArgument);
}

TEST_CASE("ddpm_step") {
    RandomSource rng(2, 0);
    SUBCASE("exact noise on a point mass drives the chain to the point") {
        const Image2D target(3, 3, std::vector<double>{0.5, -0.25, 0.75, 0, 0.9, -0.9, 0.1, 0.2, -0.6});
        const PointMass model(target);
        Image2D x = gaussian_noise(rng, 3, 3);
        const Image2D zero(3, 3, 0.0);
        for (int t = 1000; t >= 1; --t) x = ddpm_step(x, model.predict_noise(x, t, schedule()), t, t - 1, 0.0, zero, schedule());
        CHECK(max_abs_diff(x, target) < 1e-6);
    }
    SUBCASE("a single jump to level zero returns the clipped x0 estimate") {
        const Image2D x = gaussian_noise(rng, 3, 4);
        const Image2D eps = gaussian_noise(rng, 3, 4);
        const Image2D out = ddpm_step(x, eps, 1000, 0, 0.0, Image2D(3, 4, 0.0), schedule());
        CHECK(max_abs_diff(out, clip(predict_x0(x, eps, 1000, schedule()))) < 1e-12);
    }
    SUBCASE("step order") {
        const Image2D x(2, 2, 0.0);
        CHECK_THROWS_AS(ddpm_step(x, x, 10, 10, 0.0, x, schedule()), InvalidArgument);
        CHECK_THROWS_AS(ddpm_step(x, x, 10, 20, 0.0, x, schedule()), InvalidArgument);
    }
}

TEST_CASE("ddim_step") {
    RandomSource rng(3, 0);
    SUBCASE("sigma zero is deterministic") {
        const Image2D x = gaussian_noise(rng, 4, 4), eps = gaussian_noise(rng, 4, 4), z = gaussian_noise(rng, 4, 4);
        CHECK(ddim_step(x, eps, 700, 650, 0.0, z, schedule()) == ddim_step(x, eps, 700, 650, 0.0, z, schedule()));
        CHECK(ddim_step(x, eps, 700, 650, 0.0, z, schedule()) ==
              ddim_step(x, eps, 700, 650, 0.0, gaussian_noise(rng, 4, 4), schedule()));
    }
    SUBCASE("exact noise stays on the point-mass manifold") {
        const Image2D target(2, 3, std::vector<double>{0.1, -0.4, 0.8, 0.3, -0.9, 0.0});
        const PointMass model(target);
        const Image2D x0_noise = gaussian_noise(rng, 2, 3);
        const Image2D x = q_sample(target, 800, x0_noise, schedule());
        const Image2D eps = model.predict_noise(x, 800, schedule());
        const Image2D next = ddim_step(x, eps, 800, 760, 0.0, Image2D(2, 3, 0.0), schedule());
        CHECK(max_abs_diff(predict_x0(next, eps, 760, schedule()), target) < 1e-10);
    }
    SUBCASE("radicand must stay non-negative") {
        const Image2D x(2, 2, 0.0);
        const double too_big = std::sqrt(1.0 - schedule().alpha_bar(5)) * 1.01;
        CHECK_THROWS_AS(ddim_step(x, x, 10, 5, too_big, x, schedule()), InvalidArgument);
    }
}

TEST_CASE("property: ddpm with posterior sigma equals ddim at eta 1") {
    RandomSource rng(4, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const int t = 1 + static_cast<int>(rng.uniform_index(1000));
        const Image2D x = gaussian_noise(rng, 3, 3), eps = gaussian_noise(rng, 3, 3), z = gaussian_noise(rng, 3, 3);
        for (bool clip_x0 : {false, true}) {
            const Image2D a = ddpm_step(x, eps, t, t - 1, sigma(schedule(), SigmaMode::posterior(), t, t - 1), z,
                                        schedule(), clip_x0);
            const Image2D b = ddim_step(x, eps, t, t - 1, sigma(schedule(), SigmaMode::ddim(1.0), t, t - 1), z,
                                        schedule(), clip_x0);
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(std::abs(a.data()[i] - b.data()[i]) <= 1e-10 * std::max(1.0, std::abs(a.data()[i])));
            }
        }
    }
}

TEST_CASE("noise_condition matches q_sample") {
    RandomSource rng(5, 0);
    const Image2D x0 = gaussian_noise(rng, 3, 3), z = gaussian_noise(rng, 3, 3);
    CHECK(noise_condition(x0, 0, schedule(), z) == x0);
    CHECK(noise_condition(x0, 321, schedule(), z) == q_sample(x0, 321, z, schedule()));
}

TEST_CASE("sscs_compose") {
    RandomSource rng(6, 0);
    const Image2D a = gaussian_noise(rng, 4, 3), b = gaussian_noise(rng, 4, 3);
    CHECK(sscs_compose(a, b, Image2D(4, 3, 1.0)) == b);
    CHECK(sscs_compose(a, b, Image2D(4, 3, 0.0)) == a);
    Image2D rows(4, 3, 0.0);
    for (std::size_t c = 0; c < 3; ++c) rows(0, c) = rows(2, c) = 1.0;
    const Image2D out = sscs_compose(a, b, rows);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(out(r, c) == (r % 2 == 0 ? b(r, c) : a(r, c)));
    }
    rows(1, 1) = 0.5;
    CHECK_THROWS_AS(sscs_compose(a, b, rows), InvalidArgument);
}

TEST_CASE("renoise") {
    RandomSource rng(7, 0);
    const Image2D x = gaussian_noise(rng, 2, 2);
    const Image2D out = renoise(x, 40, schedule(), Image2D(2, 2, 0.0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out.data()[i] == std::sqrt(1.0 - schedule().beta(40)) * x.data()[i]);
    }
    CHECK_THROWS_AS(renoise(x, 0, schedule(), x), InvalidArgument);
    CHECK_THROWS_AS(renoise(x, 1001, schedule(), x), InvalidArgument);
    CHECK_THROWS_AS(renoise(x, 5, schedule(), Image2D(1, 2)), InvalidArgument);
    CHECK(renoise_between(x, 39, 40, schedule(), x) == renoise(x, 40, schedule(), x));
}

TEST_CASE("renoise moment oracles over 1e5 draws") {
    const int n = 100000;
    const double x0 = 0.6;
    SUBCASE("one step from x0 has variance beta_1") {
        RandomSource rng(8, 0);
        double sum = 0.0, sum2 = 0.0;
        const Image2D start(1, 1, x0);
        for (int i = 0; i < n; ++i) {
            const double v = renoise(start, 1, schedule(), Image2D(1, 1, rng.normal()))(0, 0);
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / n, var = sum2 / n - mean * mean;
        const double beta = schedule().beta(1);
        CHECK(std::abs(mean - std::sqrt(1.0 - beta) * x0) < 3.0 * std::sqrt(beta / n));
        CHECK(std::abs(var - beta) < 3.0 * beta * std::sqrt(2.0 / n));
    }
    SUBCASE("sequential steps reproduce the q_sample marginal") {
        RandomSource rng(9, 0);
        const int t_star = 60;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            Image2D x(1, 1, x0);
            for (int t = 1; t <= t_star; ++t) x = renoise(x, t, schedule(), Image2D(1, 1, rng.normal()));
            sum += x(0, 0);
            sum2 += x(0, 0) * x(0, 0);
        }
        const double ab = schedule().alpha_bar(t_star);
        const double var_ref = 1.0 - ab;
        const double mean = sum / n, var = sum2 / n - mean * mean;
        CHECK(std::abs(mean - std::sqrt(ab) * x0) < 3.0 * std::sqrt(var_ref / n));
        CHECK(std::abs(var - var_ref) < 3.0 * var_ref * std::sqrt(2.0 / n));
    }
    SUBCASE("a jump between plan steps matches the marginal") {
        RandomSource rng(10, 0);
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            Image2D x = q_sample(Image2D(1, 1, x0), 200, Image2D(1, 1, rng.normal()), schedule());
            x = renoise_between(x, 200, 240, schedule(), Image2D(1, 1, rng.normal()));
            sum += x(0, 0);
            sum2 += x(0, 0) * x(0, 0);
        }
        const double ab = schedule().alpha_bar(240);
        const double mean = sum / n, var = sum2 / n - mean * mean;
        CHECK(std::abs(mean - std::sqrt(ab) * x0) < 3.0 * std::sqrt((1.0 - ab) / n));
        CHECK(std::abs(var - (1.0 - ab)) < 3.0 * (1.0 - ab) * std::sqrt(2.0 / n));
    }
}

TEST_CASE("reconstruct_slice with alpha 1 returns the input") {
    RandomSource rng(11, 0);
    const Image2D x = gaussian_noise(rng, 6, 5);
    const IidGaussianPrior model;
    CHECK(reconstruct_slice(x, 1, model, schedule(), small_config(5, 3)) == x);
}

TEST_CASE("reconstruct_slice K=1 matches a straight-line sampler") {
    RandomSource data(12, 0);
    const Image2D x = clip(0.5 * gaussian_noise(data, 4, 6));
    const IidGaussianPrior model(0.25);
    SamplerConfig cfg = small_config(20, 1);
    cfg.seed = 99;
    RandomSource a(cfg.seed, 0), b(cfg.seed, 0);
    const Image2D lib = reconstruct_slice(x, 2, model, schedule(), cfg, a);
    const Image2D ref = straight_line_sampler(x, 2, model, cfg.plan.steps, b);
    CHECK(max_abs_diff(lib, ref) < 1e-12);
}

TEST_CASE("property: data consistency and budget") {
    RandomSource rng(13, 0);
    const IidGaussianPrior model;
    for (int alpha : {1, 2, 3, 4, 8}) {
        for (auto [steps, refine] : {std::pair{4, 1}, std::pair{3, 4}, std::pair{1, 2}}) {
            const Image2D x = gaussian_noise(rng, 3, 4);
            SamplerConfig cfg = small_config(steps, refine);
            cfg.seed = rng.next_u64();
            cfg.sscs_period = 1 + static_cast<int>(rng.uniform_index(3));
            SliceStats stats;
            RandomSource stream(cfg.seed, 0);
            const Image2D out = reconstruct_slice(x, alpha, model, schedule(), cfg, stream, &stats);
            CHECK(stats.denoiser_calls == static_cast<long>(steps) * refine);
            ConditionPair pair = pad_axial(x, alpha);
            pair.x_con_0 = sscs_compose(Image2D(out.height(), out.width(), 0.0), out, pair.mask);
            CHECK(unpad_axial(pair) == x);
        }
    }
}

TEST_CASE("reconstruct_slice determinism and sigma modes") {
    RandomSource rng(14, 0);
    const Image2D x = clip(gaussian_noise(rng, 3, 4));
    const IidGaussianPrior model;
    for (const char* mode : {"posterior", "beta", "ddim:0", "ddim:0.5", "ddim:1"}) {
        SamplerConfig cfg = small_config(6, 2);
        cfg.sigma_mode = SigmaMode::parse(mode);
        cfg.seed = 5;
        const Image2D a = reconstruct_slice(x, 2, model, schedule(), cfg);
        CHECK(a == reconstruct_slice(x, 2, model, schedule(), cfg));
        CHECK(all_finite(a.data()));
    }
}

TEST_CASE("reconstruct_slice reports non-finite samples") {
    const NanModel model;
    try {
        reconstruct_slice(Image2D(2, 2, 0.0), 2, model, schedule(), small_config(4, 2));
        FAIL("expected a sampling failure");
    } catch (const SamplingFailure& e) {
        CHECK(e.timestep() == 1000);
        CHECK(e.refine() == 1);
    }
}

TEST_CASE("reconstruct_slice rejects bad configs") {
    const IidGaussianPrior model;
    SamplerConfig cfg = small_config(4, 1);
    cfg.sscs_period = 0;
    CHECK_THROWS_AS(reconstruct_slice(Image2D(2, 2, 0.0), 2, model, schedule(), cfg), InvalidArgument);
    cfg = small_config(4, 1);
    cfg.plan.refine = 0;
    CHECK_THROWS_AS(reconstruct_slice(Image2D(2, 2, 0.0), 2, model, schedule(), cfg), InvalidArgument);
    CHECK_THROWS_AS(reconstruct_slice(Image2D(2, 2, 0.0), 0, model, schedule(), small_config(4, 1)),
                    InvalidArgument);
}

TEST_CASE("reconstruct_volume") {
    RandomSource rng(15, 0);
    Volume3D vol(3, 4, 4);
    for (double& v : vol.data()) v = std::clamp(rng.normal(), -1.0, 1.0);
    const IidGaussianPrior model;
    SamplerConfig cfg = small_config(5, 2);
    cfg.seed = 17;

    const auto base = reconstruct_volume(vol, 2, model, schedule(), cfg);
    CHECK(base.volume.depth() == 6);
    CHECK(base.report.denoiser_calls == 4L * 5 * 2);
    CHECK(base.report.planes == 4);
    CHECK(base.report.output_dims == std::array<std::size_t, 3>{6, 4, 4});

    SUBCASE("plane order and thread count do not matter") {
        VolumeOptions opts;
        opts.plane_order = {3, 1, 0, 2};
        CHECK(reconstruct_volume(vol, 2, model, schedule(), cfg, opts).volume == base.volume);
        opts.plane_order.clear();
        opts.threads = 3;
        CHECK(reconstruct_volume(vol, 2, model, schedule(), cfg, opts).volume == base.volume);
        opts.plane_order = {0, 0, 1, 2};
        CHECK_THROWS_AS(reconstruct_volume(vol, 2, model, schedule(), cfg, opts), InvalidArgument);
    }
    SUBCASE("fusion is the plain average") {
        VolumeOptions yz;
        yz.axes = AxisSet::yz;
        VolumeOptions both;
        both.axes = AxisSet::both;
        const Volume3D b = reconstruct_volume(vol, 2, model, schedule(), cfg, yz).volume;
        const Volume3D f = reconstruct_volume(vol, 2, model, schedule(), cfg, both).volume;
        for (std::size_t i = 0; i < f.size(); ++i) {
            CHECK(f.data()[i] == 0.5 * (base.volume.data()[i] + b.data()[i]));
        }
    }
    SUBCASE("a single plane reduces to reconstruct_slice") {
        Volume3D one(3, 1, 4);
        for (double& v : one.data()) v = std::clamp(rng.normal(), -1.0, 1.0);
        const Volume3D out = reconstruct_volume(one, 2, model, schedule(), cfg).volume;
        RandomSource stream(cfg.seed, plane_stream(AxialPlane::xz, 0));
        const Image2D slice = reconstruct_slice(extract_axial_slice(one, AxialPlane::xz, 0), 2, model, schedule(),
                                                cfg, stream);
        CHECK(extract_axial_slice(out, AxialPlane::xz, 0) == slice);
    }
    SUBCASE("failures name the plane") {
        const NanModel bad;
        CHECK_THROWS_WITH_AS(reconstruct_volume(vol, 2, bad, schedule(), cfg), doctest::Contains("xz plane 0"),
                             SamplingFailure);
    }
}

TEST_CASE("axis set parsing") {
    CHECK(parse_axis_set("both") == AxisSet::both);
    CHECK(to_string(parse_axis_set("yz")) == "yz");
    CHECK_THROWS_AS(parse_axis_set("xy"), InvalidArgument);
    CHECK(plane_stream(AxialPlane::xz, 3) != plane_stream(AxialPlane::yz, 3));
}
