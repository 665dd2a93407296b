#include "gfcg/schedules.hpp"

#include <cmath>

#include "gfcg/errors.hpp"

namespace gfcg {

namespace {

double warp(int t, int steps, double sigma_min, double sigma_max, double rho) {
    const double lo = std::pow(sigma_min, 1.0 / rho);
    const double hi = std::pow(sigma_max, 1.0 / rho);
    const double frac = static_cast<double>(steps - t) / static_cast<double>(steps - 1);
    return std::pow(hi + frac * (lo - hi), rho);
}

void check_ve(int steps, double sigma_min, double sigma_max, double rho, int min_steps) {
    if (steps < min_steps) throw ConfigError("steps", "must be >= " + std::to_string(min_steps));
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("rho", "must be positive");
    if (!(sigma_min > 0.0) || !std::isfinite(sigma_min))
        throw ConfigError("sigma_min", "must be positive");
    if (!std::isfinite(sigma_max)) throw ConfigError("sigma_max", "must be finite");
    if (steps >= 2 && !(sigma_max > sigma_min))
        throw ConfigError("sigma_max", "must exceed sigma_min");
}

}  // namespace

NoiseLevel NoiseSchedule::level(int t) const {
    if (kind_ == ScheduleKind::variance_preserving) {
        const double ab = alpha_bar(t);
        return {std::sqrt(ab), std::sqrt(1.0 - ab)};
    }
    return {1.0, sigma(t)};
}

double NoiseSchedule::terminal_std() const {
    return kind_ == ScheduleKind::variance_preserving ? 1.0 : sigma_.back();
}

NoiseSchedule make_vp_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw ConfigError("steps", "must be >= 2");
    if (!(beta_start > 0.0)) throw ConfigError("beta_start", "must be positive");
    if (!(beta_end >= beta_start)) throw ConfigError("beta_end", "must be >= beta_start");
    if (!(beta_end < 1.0)) throw ConfigError("beta_end", "must be < 1");

    NoiseSchedule s;
    s.kind_ = ScheduleKind::variance_preserving;
    s.steps_ = steps;
    s.vp_ = {beta_start, beta_end};
    const auto n = static_cast<std::size_t>(steps) + 1;
    s.alpha_.assign(n, 1.0);
    s.alpha_bar_.assign(n, 1.0);
    s.sigma_.assign(n, 0.0);
    for (int t = 1; t <= steps; ++t) {
        const double beta =
            beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) / (steps - 1);
        const auto i = static_cast<std::size_t>(t);
        s.alpha_[i] = 1.0 - beta;
        s.alpha_bar_[i] = s.alpha_bar_[i - 1] * s.alpha_[i];
        s.sigma_[i] = std::sqrt(1.0 - s.alpha_bar_[i]);
    }
    return s;
}

NoiseSchedule make_ve_schedule(int steps, double sigma_min, double sigma_max, double rho) {
    check_ve(steps, sigma_min, sigma_max, rho, 2);

    NoiseSchedule s;
    s.kind_ = ScheduleKind::variance_exploding;
    s.steps_ = steps;
    s.ve_ = {sigma_min, sigma_max, rho};
    const auto n = static_cast<std::size_t>(steps) + 1;
    s.alpha_.assign(n, 1.0);
    s.alpha_bar_.assign(n, 1.0);
    s.sigma_.assign(n, 0.0);
    for (int t = 1; t <= steps; ++t) s.sigma_[static_cast<std::size_t>(t)] = warp(t, steps, sigma_min, sigma_max, rho);
    // The warp is exact at the endpoints only up to pow() rounding; pin them.
    s.sigma_[1] = sigma_min;
    s.sigma_[n - 1] = sigma_max;
    return s;
}

std::vector<double> karras_sigmas_descending(int steps, double sigma_min, double sigma_max,
                                             double rho) {
    check_ve(steps, sigma_min, sigma_max, rho, 1);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    if (steps == 1) {
        out.push_back(sigma_max);
    } else {
        for (int t = steps; t >= 1; --t) out.push_back(warp(t, steps, sigma_min, sigma_max, rho));
        out.front() = sigma_max;
        out.back() = sigma_min;
    }
    out.push_back(0.0);
    return out;
}

}  // namespace gfcg
