#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isorec/denoiser.hpp"

namespace isorec {

class RandomSource;

/// Shape of the residual convolutional noise predictor.
struct TinyArch {
    int channels = 16;
    int blocks = 3;
    int embed_dim = 16;

    void validate() const;
    std::string describe() const;
    friend bool operator==(const TinyArch&, const TinyArch&) = default;
};

/// Provenance carried alongside the weights and written into checkpoints.
struct TrainingRecord {
    std::string schedule_family = "linear";
    int schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::uint64_t seed = 0;
    long steps = 0;
    double final_loss = 0.0;
    std::string optimizer = "none";
    double learning_rate = 0.0;
    double momentum = 0.0;
    int batch_size = 0;
};

/// A named slice of the flat parameter vector.
struct TensorSlot {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Residual CNN: 3x3 input conv, `blocks` residual blocks
///   h <- h + conv(silu(conv(h) + b + W_t * emb(t))) ,
/// then silu and a 3x3 output conv back to one channel. emb(t) is a sinusoidal
/// timestep embedding projected to a per-channel bias in every block.
/// The output conv starts at zero, so a fresh model predicts zero noise.
class TinyDenoiser final : public Denoiser {
public:
    explicit TinyDenoiser(TinyArch arch = {});

    /// He-style initialization with the output layer zeroed.
    static TinyDenoiser initialized(TinyArch arch, RandomSource& rng);

    Image2D predict_noise(const Image2D& x_t, int t, const NoiseSchedule& schedule) const override;
    std::string kind() const override { return "tiny_conv"; }

    Image2D forward(const Image2D& x, int t) const;

    /// Mean squared error between forward(x, t) and `target`. Adds
    /// weight * dLoss/dParams into `grad` (length parameter_count()).
    double loss_and_gradient(const Image2D& x, int t, const Image2D& target, std::span<double> grad,
                             double weight = 1.0) const;

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }
    const std::vector<TensorSlot>& tensors() const noexcept { return slots_; }
    const TinyArch& arch() const noexcept { return arch_; }

    /// Rounds every parameter to the nearest float32 so checkpoints are lossless.
    void round_to_float32() noexcept;

    TrainingRecord record;

private:
    struct Layout {
        std::size_t in_w, in_b, out_w, out_b;
        std::vector<std::size_t> w1, b1, temb, w2, b2;
    };
    struct Activations;

    void add_slot(const std::string& name, std::vector<std::size_t> shape, std::size_t& offset_out);
    std::vector<double> embedding(int t) const;
    Activations run_forward(const Image2D& x, int t) const;

    TinyArch arch_;
    std::vector<TensorSlot> slots_;
    Layout layout_{};
    std::vector<double> params_;
};

}  // namespace isorec
