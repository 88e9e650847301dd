#include <doctest.h>

#include <cmath>

#include "isorec/error.hpp"
#include "isorec/synth.hpp"

using namespace isorec;

namespace {

// Normalized autocorrelation of a mean-removed 1D signal at the given lag.
double autocorrelation(const std::vector<double>& v, std::size_t lag) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) den += (v[i] - mean) * (v[i] - mean);
    for (std::size_t i = 0; i + lag < v.size(); ++i) num += (v[i] - mean) * (v[i + lag] - mean);
    return num / den;
}

}  // namespace

TEST_CASE("synthesize is deterministic and respects dims") {
    for (SynthKind kind : {SynthKind::striped, SynthKind::blobs, SynthKind::gaussian}) {
        SynthOptions o;
        o.kind = kind;
        o.dims = {5, 7, 9};
        o.seed = 11;
        const Volume3D a = synthesize(o);
        CHECK(a.depth() == 5);
        CHECK(a.height() == 7);
        CHECK(a.width() == 9);
        CHECK(a == synthesize(o));
        o.seed = 12;
        CHECK_FALSE(a == synthesize(o));
        CHECK(all_finite(a.data()));
    }
}

TEST_CASE("textures stay inside the canonical range") {
    SynthOptions o;
    o.dims = {16, 16, 16};
    for (SynthKind kind : {SynthKind::striped, SynthKind::blobs}) {
        o.kind = kind;
        for (double v : synthesize(o).data()) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("stripe period shows up in the autocorrelation") {
    SynthOptions o;
    o.dims = {64, 64, 64};
    o.period = 8.0;
    o.seed = 3;
    const Volume3D v = synthesize(o);
    std::vector<double> along_x, along_z;
    for (std::size_t i = 0; i < 64; ++i) {
        along_x.push_back(v(10, 20, i));
        along_z.push_back(v(i, 20, 10));
    }
    for (const auto& line : {along_x, along_z}) {
        CHECK(autocorrelation(line, 8) > 0.8);
        CHECK(autocorrelation(line, 4) < -0.8);
        CHECK(autocorrelation(line, 16) > 0.6);
    }
}

TEST_CASE("gaussian columns have the AR(1) lag-one correlation") {
    SynthOptions o;
    o.kind = SynthKind::gaussian;
    o.dims = {16, 64, 64};
    o.rho = 0.9;
    const Volume3D v = synthesize(o);
    double c0 = 0.0, c1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t y = 0; y < 64; ++y) {
        for (std::size_t x = 0; x < 64; ++x) {
            for (std::size_t z = 0; z < 16; ++z) {
                c0 += v(z, y, x) * v(z, y, x);
                ++n0;
                if (z + 1 < 16) {
                    c1 += v(z, y, x) * v(z + 1, y, x);
                    ++n1;
                }
            }
        }
    }
    CHECK(std::abs(c0 / n0 - 1.0) < 0.05);
    CHECK(std::abs(c1 / n1 - 0.9) < 0.05);
}

TEST_CASE("synthesize argument errors") {
    CHECK_THROWS_AS(parse_synth_kind("noise"), InvalidArgument);
    CHECK(to_string(parse_synth_kind("blobs")) == "blobs");
    SynthOptions o;
    o.dims = {0, 4, 4};
    CHECK_THROWS_AS(synthesize(o), InvalidArgument);
    o.dims = {4, 4, 4};
    o.period = 1.0;
    CHECK_THROWS_AS(synthesize(o), InvalidArgument);
}
