#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "isorec/error.hpp"
#include "isorec/metrics.hpp"
#include "isorec/random.hpp"
#include "support/ssim_oracle.hpp"

using namespace isorec;
using isorec::testing::naive_ssim;

namespace {

Image2D random_levels(RandomSource& rng, std::size_t h, std::size_t w) {
    Image2D img(h, w);
    for (double& v : img.data()) v = 255.0 * rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("psnr") {
    RandomSource rng(1, 0);
    const Image2D a = random_levels(rng, 8, 8);
    CHECK(psnr(a, a, 255.0) == std::numeric_limits<double>::infinity());

    Image2D b = a;
    for (double& v : b.data()) v += 16.0;
    const double oracle = 10.0 * std::log10(255.0 * 255.0 / 256.0);
    CHECK(std::abs(psnr(a, b, 255.0) - oracle) < 1e-6);
    CHECK(std::abs(oracle - 24.05) < 0.01);

    const double c = 3.7;
    const double base = psnr(a, random_levels(rng, 8, 8), 255.0);
    RandomSource again(1, 0);
    const Image2D a2 = random_levels(again, 8, 8);
    const Image2D b2 = random_levels(again, 8, 8);
    CHECK(std::abs(psnr(c * a2, c * b2, c * 255.0) - base) < 1e-12);

    CHECK_THROWS_AS(psnr(a, Image2D(8, 7), 255.0), InvalidArgument);
    CHECK_THROWS_AS(psnr(a, b, 0.0), InvalidArgument);
}

TEST_CASE("property: psnr strictly decreases with mse") {
    RandomSource rng(2, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const Image2D a = random_levels(rng, 6, 6);
        Image2D d(6, 6);
        for (double& v : d.data()) v = rng.normal();
        const double s1 = 0.1 + rng.uniform(), s2 = s1 * (1.0 + 0.5 * rng.uniform());
        CHECK(psnr(a, a + s1 * d, 255.0) > psnr(a, a + s2 * d, 255.0));
    }
}

TEST_CASE("psnr over volumes pools every voxel") {
    const Volume3D a(2, 2, 2, 0.0);
    Volume3D b = a;
    b(1, 1, 1) = 8.0;
    CHECK(std::abs(psnr(a, b, 255.0) - 10.0 * std::log10(255.0 * 255.0 / 8.0)) < 1e-12);
}

TEST_CASE("ssim closed forms") {
    RandomSource rng(3, 0);
    const Image2D x = random_levels(rng, 16, 16);
    CHECK(ssim(x, x, 255.0) == 1.0);
    const double eps1 = 0.01 * 0.01;
    CHECK(std::abs(ssim(Image2D(11, 11, 1.0), Image2D(11, 11, 0.0), 1.0) - eps1 / (1.0 + eps1)) < 1e-15);
    CHECK(std::abs(ssim(Image2D(11, 11, 1.0), Image2D(11, 11, 0.0), 1.0) - 9.999e-5) < 1e-8);
    CHECK_THROWS_AS(ssim(Image2D(10, 12), Image2D(10, 12), 255.0), InvalidArgument);
    CHECK_THROWS_AS(ssim(x, Image2D(16, 15), 255.0), InvalidArgument);
}

TEST_CASE("ssim matches a naive double loop") {
    RandomSource rng(4, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 11 + rng.uniform_index(10), w = 11 + rng.uniform_index(10);
        const Image2D x = random_levels(rng, h, w);
        Image2D y = x;
        for (double& v : y.data()) v = std::clamp(v + 40.0 * rng.normal(), 0.0, 255.0);
        CHECK(std::abs(ssim(x, y, 255.0) - naive_ssim(x, y, 255.0)) < 1e-10);
    }
}

TEST_CASE("property: ssim symmetry and bounds") {
    RandomSource rng(5, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const Image2D x = random_levels(rng, 14, 14);
        Image2D y = random_levels(rng, 14, 14);
        if (trial % 3 == 0) y = 255.0 * Image2D(14, 14, 1.0) - x;
        const double s = ssim(x, y, 255.0);
        CHECK(std::abs(s - ssim(y, x, 255.0)) < 1e-12);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("evaluate_volume and csv") {
    RandomSource rng(6, 0);
    Volume3D truth(12, 2, 12);
    for (double& v : truth.data()) v = rng.uniform() * 2.0 - 1.0;
    Volume3D recon = truth;
    recon(3, 1, 4) += 0.3;

    const MetricReport rep = evaluate_volume(recon, truth, AxialPlane::xz, 255.0, true);
    REQUIRE(rep.slices.size() == 2);
    CHECK(rep.slices[0].psnr_db == std::numeric_limits<double>::infinity());
    CHECK(std::isfinite(rep.slices[1].psnr_db));
    CHECK(rep.slices[0].ssim == 1.0);
    CHECK(rep.slices[1].axis == "xz");

    const Image2D levels = to_8bit_levels(extract_axial_slice(truth, AxialPlane::xz, 1));
    for (double v : levels.data()) CHECK(v == std::round(v));

    const std::string csv = metrics_csv(rep);
    CHECK(csv.rfind("slice_id,axis,psnr_db,ssim\n", 0) == 0);
    CHECK(csv.find("0,xz,inf,1") != std::string::npos);
}

TEST_CASE("gaussian taps") {
    const auto taps = gaussian_taps(11, 1.5);
    double sum = 0.0;
    for (double t : taps) sum += t;
    CHECK(std::abs(sum - 1.0) < 1e-15);
    CHECK(taps[5] > taps[4]);
    CHECK(taps[0] == doctest::Approx(taps[10]).epsilon(1e-15));
}
