#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "isorec/condition.hpp"
#include "isorec/denoiser.hpp"
#include "isorec/grid.hpp"
#include "isorec/random.hpp"
#include "isorec/schedule.hpp"

namespace isorec {

/// (x_t - sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_bar_t).
Image2D predict_x0(const Image2D& x_t, const Image2D& eps_hat, int t, const NoiseSchedule& schedule);

/// Ancestral step t_from -> t_to: posterior mean of q(x_to | x_t, x0_hat) plus sigma * z.
/// x0_hat is clipped to [-1, 1] when `clip_x0` is set.
Image2D ddpm_step(const Image2D& x_t, const Image2D& eps_hat, int t_from, int t_to, double sigma, const Image2D& z,
                  const NoiseSchedule& schedule, bool clip_x0 = true);

/// Generalized (DDIM) step. With clipping on, the noise direction is
/// re-derived from the clipped x0_hat so that x_t stays on the same line.
/// Requires sigma^2 <= 1 - alpha_bar_to.
Image2D ddim_step(const Image2D& x_t, const Image2D& eps_hat, int t_from, int t_to, double sigma, const Image2D& z,
                  const NoiseSchedule& schedule, bool clip_x0 = true);

/// Brings the sparse condition to noise level t; same contract as q_sample.
Image2D noise_condition(const Image2D& x_con_0, int t, const NoiseSchedule& schedule, const Image2D& z);

/// mask * x_con_t + (1 - mask) * x_star. The mask must be binary.
Image2D sscs_compose(const Image2D& x_star, const Image2D& x_con_t, const Image2D& mask);

/// One forward transition at training step t: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * z.
Image2D renoise(const Image2D& x_prev, int t, const NoiseSchedule& schedule, const Image2D& z);

/// Forward jump from level t_to back up to t_from (t_from > t_to). Equals
/// renoise(x, t_from) when the two steps are adjacent.
Image2D renoise_between(const Image2D& x, int t_to, int t_from, const NoiseSchedule& schedule, const Image2D& z);

struct SamplerConfig {
    TimestepPlan plan = uniform_subsequence(1000, 25, 40);
    SigmaMode sigma_mode = SigmaMode::posterior();
    /// Compose with the condition on every n-th plan step (1 = all steps).
    int sscs_period = 1;
    /// Overwrite the known rows of the result with the condition.
    bool final_clamp = true;
    /// Clip x0 estimates to the canonical range inside each step.
    bool clip_x0 = true;
    std::uint64_t seed = 0;

    void validate(const NoiseSchedule& schedule) const;
};

struct SliceStats {
    long denoiser_calls = 0;
};

/// Isotropic reconstruction of one axial slice: pad, then for every plan
/// step noise the condition to the target level and run K rounds of
/// (reverse step, condition composition, re-noise back up). Draws come from
/// `rng` in a fixed order: x_T, then per step the condition noise followed by
/// the step noise and re-noise of each refine round.
Image2D reconstruct_slice(const Image2D& x_axi, int alpha, const Denoiser& model, const NoiseSchedule& schedule,
                          const SamplerConfig& cfg, RandomSource& rng, SliceStats* stats = nullptr);

/// Uses the stream RandomSource(cfg.seed, 0).
Image2D reconstruct_slice(const Image2D& x_axi, int alpha, const Denoiser& model, const NoiseSchedule& schedule,
                          const SamplerConfig& cfg);

enum class AxisSet { xz, yz, both };

AxisSet parse_axis_set(const std::string& text);
std::string to_string(AxisSet axes);

/// Stream id used for a plane; keyed only by orientation and index.
std::uint64_t plane_stream(AxialPlane plane, std::size_t index) noexcept;

struct VolumeOptions {
    AxisSet axes = AxisSet::xz;
    int threads = 1;
    /// Processing order of the planes of each orientation; empty means ascending.
    std::vector<std::size_t> plane_order;
};

struct ReconstructionReport {
    int alpha = 1;
    std::string axes;
    std::string model_kind;
    std::vector<int> plan_steps;
    int refine = 1;
    long total_steps_per_slice = 0;
    std::string sigma_mode;
    int sscs_period = 1;
    bool final_clamp = true;
    bool clip_x0 = true;
    std::uint64_t seed = 0;
    std::size_t planes = 0;
    long denoiser_calls = 0;
    double seconds = 0.0;
    std::array<std::size_t, 3> input_dims{};
    std::array<std::size_t, 3> output_dims{};
};

struct VolumeReconstruction {
    Volume3D volume;
    ReconstructionReport report;
};

/// Reconstructs every selected plane of a low-axial-resolution volume
/// independently. With both orientations the two results are averaged.
VolumeReconstruction reconstruct_volume(const Volume3D& vol, int alpha, const Denoiser& model,
                                        const NoiseSchedule& schedule, const SamplerConfig& cfg,
                                        const VolumeOptions& options = {});

}  // namespace isorec
