#include "isorec/schedule.hpp"

#include <cmath>
#include <string>

#include "isorec/error.hpp"

namespace isorec {

NoiseSchedule::NoiseSchedule(std::vector<double> betas, std::string family) : family_(std::move(family)) {
    if (betas.empty()) throw InvalidArgument("noise schedule needs at least one step");
    betas_.reserve(betas.size() + 1);
    betas_.push_back(0.0);
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("beta values must lie in (0, 1)");
        betas_.push_back(b);
    }
    alpha_bars_.assign(betas_.size(), 1.0);
    posterior_vars_.assign(betas_.size(), 0.0);
    for (std::size_t t = 1; t < betas_.size(); ++t) {
        alpha_bars_[t] = alpha_bars_[t - 1] * (1.0 - betas_[t]);
        posterior_vars_[t] = betas_[t] * (1.0 - alpha_bars_[t - 1]) / (1.0 - alpha_bars_[t]);
    }
}

std::size_t NoiseSchedule::checked(int t) const {
    if (t < 0 || t > steps()) {
        throw InvalidArgument("timestep " + std::to_string(t) + " outside 0.." + std::to_string(steps()));
    }
    return static_cast<std::size_t>(t);
}

NoiseSchedule linear_schedule(int train_steps, double beta_start, double beta_end) {
    if (train_steps < 1) throw InvalidArgument("linear_schedule: train_steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw InvalidArgument("linear_schedule: need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(train_steps));
    for (int i = 0; i < train_steps; ++i) {
        const double frac = train_steps == 1 ? 0.0 : static_cast<double>(i) / (train_steps - 1);
        betas[static_cast<std::size_t>(i)] = beta_start + frac * (beta_end - beta_start);
    }
    return NoiseSchedule(std::move(betas), "linear");
}

SigmaMode SigmaMode::ddim(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("ddim eta must lie in [0, 1]");
    return {Kind::ddim_eta, eta};
}

SigmaMode SigmaMode::parse(const std::string& text) {
    if (text == "posterior") return posterior();
    if (text == "beta") return beta();
    if (text.rfind("ddim:", 0) == 0) {
        const std::string num = text.substr(5);
        std::size_t used = 0;
        double eta = 0.0;
        try {
            eta = std::stod(num, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != num.size()) throw InvalidArgument("bad ddim eta in sigma mode '" + text + "'");
        return ddim(eta);
    }
    if (text == "ddim") return ddim(0.0);
    throw InvalidArgument("unknown sigma mode '" + text + "' (expected posterior, beta or ddim:ETA)");
}

std::string SigmaMode::to_string() const {
    switch (kind) {
        case Kind::posterior: return "posterior";
        case Kind::beta: return "beta";
        case Kind::ddim_eta: return "ddim:" + std::to_string(eta);
    }
    return "?";
}

double step_beta_between(const NoiseSchedule& schedule, int t_from, int t_to) {
    if (!(t_from > t_to && t_to >= 0 && t_from <= schedule.steps())) {
        throw InvalidArgument("step_beta_between: need t_from > t_to >= 0");
    }
    // 1 - prod(alpha_s) without the cancellation of 1 - alpha_bar_from / alpha_bar_to.
    double log_prod = 0.0;
    for (int s = t_to + 1; s <= t_from; ++s) log_prod += std::log1p(-schedule.beta(s));
    return -std::expm1(log_prod);
}

double sigma(const NoiseSchedule& schedule, SigmaMode mode, int t_from, int t_to) {
    if (!(t_from > t_to && t_to >= 0 && t_from <= schedule.steps())) {
        throw InvalidArgument("sigma: need t_from > t_to >= 0, got " + std::to_string(t_from) + " -> " +
                              std::to_string(t_to));
    }
    const double ab_from = schedule.alpha_bar(t_from);
    const double ab_to = schedule.alpha_bar(t_to);
    const double step_beta = step_beta_between(schedule, t_from, t_to);
    switch (mode.kind) {
        case SigmaMode::Kind::beta:
            return std::sqrt(step_beta);
        case SigmaMode::Kind::posterior:
            return std::sqrt((1.0 - ab_to) / (1.0 - ab_from) * step_beta);
        case SigmaMode::Kind::ddim_eta:
            return mode.eta * std::sqrt((1.0 - ab_to) / (1.0 - ab_from)) * std::sqrt(step_beta);
    }
    return 0.0;
}

TimestepPlan uniform_subsequence(int train_steps, int count, int refine) {
    if (count < 1 || count > train_steps) {
        throw InvalidArgument("uniform_subsequence: step count " + std::to_string(count) + " outside 1.." +
                              std::to_string(train_steps));
    }
    if (refine < 1) throw InvalidArgument("uniform_subsequence: refine count must be >= 1");
    TimestepPlan plan;
    plan.refine = refine;
    plan.steps.reserve(static_cast<std::size_t>(count));
    for (long i = count; i >= 1; --i) {
        plan.steps.push_back(static_cast<int>(i * train_steps / count));
    }
    return plan;
}

void validate(const TimestepPlan& plan, const NoiseSchedule& schedule) {
    if (plan.steps.empty()) throw InvalidArgument("timestep plan is empty");
    if (plan.refine < 1) throw InvalidArgument("refine count must be >= 1");
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const int t = plan.steps[i];
        if (t < 1 || t > schedule.steps()) throw InvalidArgument("plan step outside the schedule");
        if (i > 0 && t >= plan.steps[i - 1]) throw InvalidArgument("plan steps must strictly decrease");
    }
}

}  // namespace isorec
