#pragma once

#include <span>
#include <vector>

namespace gfcg {

enum class ScheduleKind { variance_preserving, variance_exploding };

struct VpParams {
    double beta_start = 1e-4;
    double beta_end = 0.02;
    bool operator==(const VpParams&) const = default;
};

struct VeParams {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
    bool operator==(const VeParams&) const = default;
};

/// Forward marginal at one noise level: x_t = scale * x_0 + noise * eps.
/// VP levels have scale = sqrt(alpha_bar), noise = sqrt(1 - alpha_bar);
/// VE levels have scale = 1, noise = sigma.
struct NoiseLevel {
    double scale = 1.0;
    double noise = 0.0;

    /// Equivalent noise level of x_t / scale, i.e. the VE sigma.
    double ve_sigma() const { return noise / scale; }
};

/// Discrete noise schedule indexed t = 0..T (stored ascending). Sampling runs
/// t = T -> 1 and lands on t = 0; every module reads the cached arrays
/// directly so sampler and guidance always agree on the values.
///
/// The discrete arrays realize the forward SDE dx = f(x,t) dt + g(t) dw:
/// VP has f = -beta(t) x / 2 and g = sqrt(beta(t)); VE has f = 0 and
/// g = sqrt(d sigma^2 / dt). Neither coefficient is evaluated directly.
class NoiseSchedule {
public:
    ScheduleKind kind() const { return kind_; }
    int steps() const { return steps_; }

    double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t)); }
    double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
    double sigma(int t) const { return sigma_.at(static_cast<std::size_t>(t)); }
    NoiseLevel level(int t) const;

    std::span<const double> alphas() const { return alpha_; }
    std::span<const double> alpha_bars() const { return alpha_bar_; }
    std::span<const double> sigmas() const { return sigma_; }

    const VpParams& vp_params() const { return vp_; }
    const VeParams& ve_params() const { return ve_; }

    /// Standard deviation of x_T under the forward process (1 for VP).
    double terminal_std() const;

private:
    friend NoiseSchedule make_vp_schedule(int, double, double);
    friend NoiseSchedule make_ve_schedule(int, double, double, double);

    ScheduleKind kind_ = ScheduleKind::variance_exploding;
    int steps_ = 0;
    VpParams vp_;
    VeParams ve_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
    std::vector<double> sigma_;
};

/// Linear-beta DDPM discretization: beta_t = linspace(beta_start, beta_end)
/// over t = 1..T, alpha_t = 1 - beta_t, alpha_bar_t = prod alpha_1..alpha_t.
/// `sigma` holds the VP noise std sqrt(1 - alpha_bar_t).
NoiseSchedule make_vp_schedule(int steps, double beta_start, double beta_end);

/// EDM rho-warped schedule:
///   sigma_t = (smax^(1/rho) + (T-t)/(T-1) (smin^(1/rho) - smax^(1/rho)))^rho, t > 0
///   sigma_0 = 0.
NoiseSchedule make_ve_schedule(int steps, double sigma_min, double sigma_max, double rho);

/// Descending sigmas (sigma_T, ..., sigma_1, 0) of the same warp, used for
/// inner solvers whose top level is only known at run time. A single step
/// degenerates to (sigma_max, 0); more steps require sigma_max > sigma_min.
std::vector<double> karras_sigmas_descending(int steps, double sigma_min, double sigma_max,
                                             double rho);

}  // namespace gfcg
