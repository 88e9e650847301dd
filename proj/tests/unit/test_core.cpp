#include <doctest.h>

#include <cmath>
#include <numeric>

#include "isorec/error.hpp"
#include "isorec/grid.hpp"
#include "isorec/random.hpp"

using namespace isorec;

namespace {

Volume3D random_volume(RandomSource& rng, std::size_t d, std::size_t h, std::size_t w) {
    Volume3D v(d, h, w);
    for (double& x : v.data()) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("philox matches the published known-answer vector") {
    // Random123 kat_vectors: philox4x32 10 rounds, zero counter and key.
    const auto out = RandomSource::philox({0, 0, 0, 0}, {0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
}

TEST_CASE("gaussian_noise is deterministic per (seed, stream)") {
    RandomSource a(7, 0), b(7, 0);
    const Image2D x = gaussian_noise(a, 9, 13);
    const Image2D y = gaussian_noise(b, 9, 13);
    CHECK(x == y);
    RandomSource c(7, 1);
    CHECK_FALSE(gaussian_noise(c, 9, 13) == x);
}

TEST_CASE("gaussian_noise moments match the standard normal") {
    RandomSource rng(11, 0);
    const Image2D img = gaussian_noise(rng, 100, 1000);
    const double n = static_cast<double>(img.size());
    const double mean = std::accumulate(img.data().begin(), img.data().end(), 0.0) / n;
    double var = 0.0;
    for (double v : img.data()) var += (v - mean) * (v - mean);
    var /= n - 1.0;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("distinct streams are uncorrelated") {
    RandomSource s0(5, 0), s1(5, 1);
    const Image2D a = gaussian_noise(s0, 1, 100000);
    const Image2D b = gaussian_noise(s1, 1, 100000);
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data()[i], y = b.data()[i];
        sa += x; sb += y; sab += x * y; saa += x * x; sbb += y * y;
    }
    const double n = static_cast<double>(a.size());
    const double r = (sab - sa * sb / n) / std::sqrt((saa - sa * sa / n) * (sbb - sb * sb / n));
    CHECK(std::abs(r) < 0.01);
}

TEST_CASE("uniform_index stays in range and covers every bucket") {
    RandomSource rng(3, 0);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits.at(rng.uniform_index(7));
    for (int h : hits) CHECK(h > 800);
}

TEST_CASE("zero-sized shapes are rejected") {
    RandomSource rng(1, 0);
    CHECK_THROWS_AS(gaussian_noise(rng, 0, 4), InvalidArgument);
    CHECK_THROWS_AS(Image2D(3, 0), InvalidArgument);
    CHECK_THROWS_AS(Image2D(2, 2, std::vector<double>(3)), InvalidArgument);
}

TEST_CASE("extract_axial_slice basics") {
    SUBCASE("single voxel") {
        Volume3D v(1, 1, 1, 0.25);
        CHECK(extract_axial_slice(v, AxialPlane::xz, 0)(0, 0) == 0.25);
        CHECK(extract_axial_slice(v, AxialPlane::yz, 0)(0, 0) == 0.25);
    }
    SUBCASE("rows run along z") {
        Volume3D v(5, 3, 4);
        for (std::size_t z = 0; z < 5; ++z)
            for (std::size_t y = 0; y < 3; ++y)
                for (std::size_t x = 0; x < 4; ++x) v(z, y, x) = static_cast<double>(z);
        const Image2D s = extract_axial_slice(v, AxialPlane::xz, 0);
        REQUIRE(s.height() == 5);
        REQUIRE(s.width() == 4);
        for (std::size_t r = 0; r < 5; ++r)
            for (double val : s.row(r)) CHECK(val == static_cast<double>(r));
        CHECK(extract_axial_slice(v, AxialPlane::yz, 2).width() == 3);
    }
    SUBCASE("out of range") {
        Volume3D v(2, 3, 4);
        CHECK_THROWS_AS(extract_axial_slice(v, AxialPlane::xz, 3), InvalidArgument);
        CHECK_THROWS_AS(extract_axial_slice(v, AxialPlane::yz, 4), InvalidArgument);
    }
}

TEST_CASE("insert_axial_slice touches only the addressed plane") {
    RandomSource rng(2, 0);
    const Volume3D v = random_volume(rng, 4, 3, 5);
    Image2D plane(4, 5, 9.0);
    const Volume3D out = insert_axial_slice(v, AxialPlane::xz, 1, plane);
    for (std::size_t z = 0; z < 4; ++z)
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 5; ++x) CHECK(out(z, y, x) == (y == 1 ? 9.0 : v(z, y, x)));
    CHECK_THROWS_AS(insert_axial_slice(v, AxialPlane::xz, 0, Image2D(4, 3)), InvalidArgument);
    CHECK_THROWS_AS(insert_axial_slice(v, AxialPlane::yz, 9, Image2D(4, 3)), InvalidArgument);
    CHECK(insert_axial_slice(Volume3D(1, 1, 1), AxialPlane::yz, 0, Image2D(1, 1, 2.0))(0, 0, 0) == 2.0);
}

TEST_CASE("property: extract then insert is the identity") {
    RandomSource rng(99, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + rng.uniform_index(6), h = 1 + rng.uniform_index(6), w = 1 + rng.uniform_index(6);
        const Volume3D v = random_volume(rng, d, h, w);
        for (AxialPlane p : {AxialPlane::xz, AxialPlane::yz}) {
            const std::size_t idx = rng.uniform_index(plane_count(v, p));
            CHECK(insert_axial_slice(v, p, idx, extract_axial_slice(v, p, idx)) == v);
        }
    }
}

TEST_CASE("8-bit mapping") {
    CHECK(from_u8(255) == 1.0);
    CHECK(from_u8(0) == -1.0);
    CHECK(to_u8(2.0) == 255);
    CHECK(to_u8(-3.0) == 0);
    for (int k = 0; k < 256; ++k) CHECK(to_u8(from_u8(static_cast<unsigned char>(k))) == k);
}

TEST_CASE("non-finite values are detected") {
    Image2D img(2, 2);
    img(1, 1) = std::nan("");
    CHECK_THROWS_AS(require_finite(img, "test"), InvalidArgument);
}
