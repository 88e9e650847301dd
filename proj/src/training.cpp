#include "isorec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "isorec/error.hpp"
#include "isorec/parallel.hpp"
#include "isorec/random.hpp"

namespace isorec {

namespace {

// One of the 8 symmetries of the square applied to a crop.
Image2D take_crop(const Image2D& src, std::size_t crop, RandomSource& rng, bool augment) {
    const std::size_t h = crop == 0 ? src.height() : crop;
    const std::size_t w = crop == 0 ? src.width() : crop;
    const std::size_t y0 = rng.uniform_index(src.height() - h + 1);
    const std::size_t x0 = rng.uniform_index(src.width() - w + 1);
    const std::size_t symmetry = augment ? rng.uniform_index(8) : 0;
    const bool transpose = (symmetry & 4u) != 0 && h == w;
    const bool flip_y = (symmetry & 1u) != 0;
    const bool flip_x = (symmetry & 2u) != 0;
    Image2D out(h, w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            std::size_t sr = transpose ? c : r;
            std::size_t sc = transpose ? r : c;
            if (flip_y) sr = h - 1 - sr;
            if (flip_x) sc = w - 1 - sc;
            out(r, c) = src(y0 + sr, x0 + sc);
        }
    }
    return out;
}

}  // namespace

Optimizer parse_optimizer(const std::string& text) {
    if (text == "adam") return Optimizer::adam;
    if (text == "sgd" || text == "sgd_momentum") return Optimizer::sgd_momentum;
    throw InvalidArgument("unknown optimizer '" + text + "' (expected adam or sgd)");
}

std::string to_string(Optimizer opt) { return opt == Optimizer::adam ? "adam" : "sgd_momentum"; }

void TrainConfig::validate() const {
    if (batch_size < 1) throw InvalidArgument("train: batch size must be positive");
    if (steps < 1) throw InvalidArgument("train: step count must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("train: learning rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("train: momentum must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("train: beta2 must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw InvalidArgument("train: epsilon must be positive");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw InvalidArgument("train: ema decay must lie in [0, 1)");
    if (clip_norm < 0.0) throw InvalidArgument("train: clip norm must be non-negative");
    if (threads < 1) throw InvalidArgument("train: threads must be positive");
}

TrainResult train_denoiser(TinyDenoiser model, std::span<const Image2D> dataset, const NoiseSchedule& schedule,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw TrainingFailure(0, "empty dataset");
    for (const auto& img : dataset) {
        if (!img.same_shape(dataset.front())) throw TrainingFailure(0, "dataset images differ in shape");
        if (!all_finite(img.data())) throw TrainingFailure(0, "dataset contains non-finite values");
    }
    if (cfg.crop > dataset.front().height() || cfg.crop > dataset.front().width()) {
        throw InvalidArgument("train: crop larger than the training images");
    }

    const std::size_t n_params = model.parameter_count();
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    std::vector<double> velocity(n_params, 0.0);
    std::vector<double> second(cfg.optimizer == Optimizer::adam ? n_params : 0, 0.0);
    std::vector<double> ema;
    std::vector<std::vector<double>> slot_grads(batch, std::vector<double>(n_params));
    std::vector<double> slot_loss(batch);
    std::vector<double> grad(n_params);

    TrainResult result{std::move(model), {}};
    TinyDenoiser& net = result.model;
    result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));

    for (long step = 0; step < cfg.steps; ++step) {
        parallel_for(batch, cfg.threads, [&](std::size_t b) {
            RandomSource rng(cfg.seed, mix64(static_cast<std::uint64_t>(step)) ^ b);
            const Image2D& src = dataset[rng.uniform_index(dataset.size())];
            const Image2D x0 = take_crop(src, cfg.crop, rng, cfg.augment);
            const int t = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(schedule.steps())));
            const Image2D eps = gaussian_noise(rng, x0.height(), x0.width());
            const Image2D x_t = q_sample(x0, t, eps, schedule);
            std::fill(slot_grads[b].begin(), slot_grads[b].end(), 0.0);
            slot_loss[b] = net.loss_and_gradient(x_t, t, eps, slot_grads[b], 1.0 / static_cast<double>(batch));
        });

        // fixed reduction order keeps traces independent of the thread count
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            loss += slot_loss[b];
            for (std::size_t i = 0; i < n_params; ++i) grad[i] += slot_grads[b][i];
        }
        loss /= static_cast<double>(batch);
        if (!std::isfinite(loss)) throw TrainingFailure(step, "non-finite loss");

        const double norm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
        if (!std::isfinite(norm)) throw TrainingFailure(step, "non-finite gradient");
        const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

        auto params = net.parameters();
        if (cfg.ema_decay > 0.0 && ema.empty()) ema.assign(params.begin(), params.end());
        double lr = cfg.learning_rate;
        if (cfg.cosine_decay) {
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(cfg.steps)));
        }
        if (cfg.optimizer == Optimizer::adam) {
            const double k = static_cast<double>(step + 1);
            const double c1 = 1.0 - std::pow(cfg.momentum, k);
            const double c2 = 1.0 - std::pow(cfg.beta2, k);
            for (std::size_t i = 0; i < n_params; ++i) {
                const double g = scale * grad[i];
                velocity[i] = cfg.momentum * velocity[i] + (1.0 - cfg.momentum) * g;
                second[i] = cfg.beta2 * second[i] + (1.0 - cfg.beta2) * g * g;
                params[i] -= lr * (velocity[i] / c1) / (std::sqrt(second[i] / c2) + cfg.epsilon);
            }
        } else {
            for (std::size_t i = 0; i < n_params; ++i) {
                velocity[i] = cfg.momentum * velocity[i] + scale * grad[i];
                params[i] -= lr * velocity[i];
            }
        }
        net.round_to_float32();
        if (!ema.empty()) {
            for (std::size_t i = 0; i < n_params; ++i) ema[i] = cfg.ema_decay * ema[i] + (1.0 - cfg.ema_decay) * params[i];
        }
        result.loss_trace.push_back(loss);
    }
    if (!ema.empty()) {
        std::copy(ema.begin(), ema.end(), net.parameters().begin());
        net.round_to_float32();
    }

    net.record.schedule_family = schedule.family();
    net.record.schedule_steps = schedule.steps();
    net.record.beta_start = schedule.beta_start();
    net.record.beta_end = schedule.beta_end();
    net.record.seed = cfg.seed;
    net.record.steps += cfg.steps;
    net.record.final_loss = window_mean(result.loss_trace, 100, true);
    net.record.optimizer = to_string(cfg.optimizer);
    net.record.learning_rate = cfg.learning_rate;
    net.record.momentum = cfg.momentum;
    net.record.batch_size = cfg.batch_size;
    return result;
}

double window_mean(std::span<const double> trace, std::size_t window, bool from_end) {
    if (trace.empty()) return 0.0;
    const std::size_t n = std::min(window, trace.size());
    const auto first = from_end ? trace.end() - static_cast<std::ptrdiff_t>(n) : trace.begin();
    return std::accumulate(first, first + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

}  // namespace isorec
