#include "isorec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "isorec/error.hpp"
#include "isorec/random.hpp"

namespace isorec {

SynthKind parse_synth_kind(const std::string& text) {
    if (text == "striped") return SynthKind::striped;
    if (text == "blobs") return SynthKind::blobs;
    if (text == "gaussian") return SynthKind::gaussian;
    throw InvalidArgument("unknown synthetic kind '" + text + "' (expected striped, blobs or gaussian)");
}

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::striped: return "striped";
        case SynthKind::blobs: return "blobs";
        case SynthKind::gaussian: return "gaussian";
    }
    return "?";
}

namespace {

Volume3D striped(const SynthOptions& o, RandomSource& rng) {
    if (!(o.period >= 2.0)) throw InvalidArgument("synth: stripe period must be >= 2");
    if (!(o.sharpness >= 0.0)) throw InvalidArgument("synth: stripe sharpness must be non-negative");
    const double two_pi = 2.0 * std::numbers::pi;
    std::array<double, 3> phase{};
    for (double& p : phase) p = two_pi * rng.uniform();
    const auto [nz, ny, nx] = o.dims;
    Volume3D vol(nz, ny, nx);
    const double k = two_pi / o.period;
    const double g = o.sharpness;
    auto profile = [g](double a) { return g > 0.0 ? std::tanh(g * std::sin(a)) / std::tanh(g) : std::sin(a); };
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const double s = profile(k * z + phase[0]) + profile(k * y + phase[1]) + profile(k * x + phase[2]);
                vol(z, y, x) = 0.3 * s;
            }
        }
    }
    return vol;
}

Volume3D blobs(const SynthOptions& o, RandomSource& rng) {
    if (o.blob_count < 1 || !(o.blob_radius > 0.0)) throw InvalidArgument("synth: blob count and radius must be positive");
    const auto [nz, ny, nx] = o.dims;
    Volume3D vol(nz, ny, nx);
    struct Blob { double z, y, x, r, a; };
    std::vector<Blob> list;
    for (int i = 0; i < o.blob_count; ++i) {
        list.push_back({rng.uniform() * nz, rng.uniform() * ny, rng.uniform() * nx,
                        o.blob_radius * (0.5 + rng.uniform()), rng.uniform() < 0.5 ? -1.0 : 1.0});
    }
    for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                double acc = 0.0;
                for (const auto& b : list) {
                    const double d2 = (z - b.z) * (z - b.z) + (y - b.y) * (y - b.y) + (x - b.x) * (x - b.x);
                    acc += b.a * std::exp(-d2 / (2.0 * b.r * b.r));
                }
                vol(z, y, x) = 0.9 * std::tanh(acc);
            }
        }
    }
    return vol;
}

Volume3D gaussian_columns(const SynthOptions& o, RandomSource& rng) {
    if (!(o.rho > -1.0 && o.rho < 1.0)) throw InvalidArgument("synth: |rho| must be < 1");
    const auto [nz, ny, nx] = o.dims;
    Volume3D vol(nz, ny, nx);
    const double innovation = std::sqrt(1.0 - o.rho * o.rho);
    for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < nx; ++x) {
            double v = rng.normal();
            vol(0, y, x) = v;
            for (std::size_t z = 1; z < nz; ++z) {
                v = o.rho * v + innovation * rng.normal();
                vol(z, y, x) = v;
            }
        }
    }
    return vol;
}

}  // namespace

Volume3D synthesize(const SynthOptions& opts) {
    if (std::any_of(opts.dims.begin(), opts.dims.end(), [](std::size_t d) { return d == 0; })) {
        throw InvalidArgument("synth: dimensions must be positive");
    }
    RandomSource rng(opts.seed, 0x5157);
    switch (opts.kind) {
        case SynthKind::striped: return striped(opts, rng);
        case SynthKind::blobs: return blobs(opts, rng);
        case SynthKind::gaussian: return gaussian_columns(opts, rng);
    }
    throw InvalidArgument("synth: unknown kind");
}

}  // namespace isorec
