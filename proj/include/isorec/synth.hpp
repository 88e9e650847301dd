#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "isorec/grid.hpp"

namespace isorec {

/// Synthetic stand-ins for isotropic EM volumes.
enum class SynthKind {
    striped,   // one soft square-wave stripe family per axis, shared period; every plane has the same statistics
    blobs,     // sum of isotropic Gaussian blobs
    gaussian,  // independent AR(1) columns along z, unit variance
};

SynthKind parse_synth_kind(const std::string& text);
std::string to_string(SynthKind kind);

struct SynthOptions {
    SynthKind kind = SynthKind::striped;
    std::array<std::size_t, 3> dims{32, 32, 32};  // z, y, x
    std::uint64_t seed = 0;
    double period = 8.0;  // striped
    /// Edge steepness of the stripe profile tanh(g sin)/tanh(g); 0 gives plain sinusoids.
    double sharpness = 3.0;
    int blob_count = 24;  // blobs
    double blob_radius = 3.0;
    double rho = 0.9;  // gaussian
};

Volume3D synthesize(const SynthOptions& opts);

}  // namespace isorec
