#pragma once

#include <string>
#include <vector>

namespace isorec {

/// Discrete-time noise schedule. Arrays are indexed by timestep t in
/// 0..steps(); index 0 holds the conventions beta=0, alpha_bar=1.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    /// betas[i] is beta_{i+1}; each must lie in (0, 1).
    explicit NoiseSchedule(std::vector<double> betas, std::string family = "custom");

    int steps() const noexcept { return static_cast<int>(betas_.size()) - 1; }
    const std::string& family() const noexcept { return family_; }

    double beta(int t) const { return betas_.at(checked(t)); }
    double alpha(int t) const { return 1.0 - beta(t); }
    double alpha_bar(int t) const { return alpha_bars_.at(checked(t)); }
    /// beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t); zero at t = 1.
    double posterior_variance(int t) const { return posterior_vars_.at(checked(t)); }

    const std::vector<double>& betas() const noexcept { return betas_; }
    const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

    double beta_start() const { return betas_.at(1); }
    double beta_end() const { return betas_.back(); }

private:
    std::size_t checked(int t) const;

    std::string family_;
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
    std::vector<double> posterior_vars_;
};

/// Linearly spaced betas, endpoints inclusive.
NoiseSchedule linear_schedule(int train_steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

/// How the reverse-step standard deviation is chosen.
struct SigmaMode {
    enum class Kind { posterior, beta, ddim_eta };
    Kind kind = Kind::posterior;
    double eta = 0.0;  // only read for ddim_eta

    static SigmaMode posterior() { return {Kind::posterior, 0.0}; }
    static SigmaMode beta() { return {Kind::beta, 0.0}; }
    static SigmaMode ddim(double eta);

    /// "posterior", "beta" or "ddim:ETA".
    static SigmaMode parse(const std::string& text);
    std::string to_string() const;
};

/// Effective beta of the jump t_to -> t_from: 1 - alpha_bar_from / alpha_bar_to.
double step_beta_between(const NoiseSchedule& schedule, int t_from, int t_to);

/// Reverse-step standard deviation between two plan steps t_from > t_to >= 0.
/// Consecutive plan steps are treated as adjacent, so for t_to = t_from - 1
/// posterior mode gives sqrt(posterior_variance(t_from)) and beta mode sqrt(beta(t_from)).
double sigma(const NoiseSchedule& schedule, SigmaMode mode, int t_from, int t_to);

/// Strictly decreasing timesteps to visit plus the refine count K.
struct TimestepPlan {
    std::vector<int> steps;
    int refine = 1;

    int step_count() const noexcept { return static_cast<int>(steps.size()); }
    /// Denoiser evaluations per slice: T * K.
    long total_steps() const noexcept { return static_cast<long>(steps.size()) * refine; }
    /// The level a step lands on: the next plan step, or 0 after the last.
    int target_of(std::size_t index) const noexcept {
        return index + 1 < steps.size() ? steps[index + 1] : 0;
    }
};

/// S steps at floor(i * T_train / S) for i = S..1. Includes T_train; gaps differ by at most one.
TimestepPlan uniform_subsequence(int train_steps, int count, int refine = 1);

void validate(const TimestepPlan& plan, const NoiseSchedule& schedule);

}  // namespace isorec
