#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isorec/grid.hpp"
#include "isorec/schedule.hpp"
#include "isorec/tiny_denoiser.hpp"

namespace isorec {

enum class Optimizer { sgd_momentum, adam };

Optimizer parse_optimizer(const std::string& text);
std::string to_string(Optimizer opt);

struct TrainConfig {
    int batch_size = 8;
    long steps = 2000;
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 2e-3;
    /// Momentum for SGD, first-moment decay for Adam.
    double momentum = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Cosine decay of the learning rate to zero over the run.
    bool cosine_decay = true;
    /// Exponential moving average of the weights returned as the model; 0 disables.
    double ema_decay = 0.0;
    /// Global gradient-norm cap; 0 disables.
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    /// Square random crop taken from each training image; 0 uses whole images.
    std::size_t crop = 0;
    /// Random flips and transposes of each crop.
    bool augment = true;
    int threads = 1;

    void validate() const;
};

struct TrainResult {
    TinyDenoiser model;
    std::vector<double> loss_trace;
};

/// Noise-matching training on lateral slices: per step draw a batch of x0,
/// t uniform in 1..T, eps ~ N(0, I), and descend on mean((eps_hat - eps)^2)
/// with Adam or momentum SGD. Every (step, batch slot) uses its own random stream, so
/// the trace is identical for identical seeds regardless of thread count.
TrainResult train_denoiser(TinyDenoiser model, std::span<const Image2D> dataset, const NoiseSchedule& schedule,
                           const TrainConfig& cfg);

/// Mean of the first/last `window` entries of a loss trace.
double window_mean(std::span<const double> trace, std::size_t window, bool from_end);

}  // namespace isorec
