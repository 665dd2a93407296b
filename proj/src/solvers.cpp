#include "gfcg/solvers.hpp"

#include <cmath>
#include <stdexcept>

namespace gfcg {

Vector ddim_step(const Vector& x_t, const Vector& eps, double alpha_t, double alpha_bar_t) {
    if (!(alpha_t > 0.0 && alpha_t <= 1.0))
        throw std::invalid_argument("ddim_step: alpha_t must lie in (0, 1]");
    if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0))
        throw std::invalid_argument("ddim_step: alpha_bar_t must lie in (0, 1]");
    if (x_t.size() != eps.size()) throw std::invalid_argument("ddim_step: dimension mismatch");
    if (alpha_t == 1.0) return x_t;
    if (alpha_bar_t == 1.0)
        throw std::invalid_argument("ddim_step: alpha_bar_t = 1 with alpha_t < 1 divides by zero");
    const double coef = (1.0 - alpha_t) / std::sqrt(1.0 - alpha_bar_t);
    return (x_t - coef * eps) / std::sqrt(alpha_t);
}

namespace {
void check_sigmas(double from, double to) {
    if (!(from > to && to >= 0.0))
        throw std::invalid_argument("solver step requires sigma_from > sigma_to >= 0");
}
}  // namespace

SolverStep euler_step(const Vector& x, double sigma_from, double sigma_to,
                      const DenoiserFn& denoiser) {
    check_sigmas(sigma_from, sigma_to);
    const Vector slope = (x - denoiser(x, sigma_from)) / sigma_from;
    return {x + (sigma_to - sigma_from) * slope, 1};
}

SolverStep heun_step(const Vector& x, double sigma_from, double sigma_to,
                     const DenoiserFn& denoiser) {
    check_sigmas(sigma_from, sigma_to);
    const double h = sigma_to - sigma_from;
    const Vector slope = (x - denoiser(x, sigma_from)) / sigma_from;
    Vector predicted = x + h * slope;
    if (sigma_to == 0.0) return {std::move(predicted), 1};
    const Vector corrected_slope = (predicted - denoiser(predicted, sigma_to)) / sigma_to;
    return {x + h * 0.5 * (slope + corrected_slope), 2};
}

}  // namespace gfcg
