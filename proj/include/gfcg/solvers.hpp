#pragma once

#include <functional>

#include "gfcg/world.hpp"

namespace gfcg {

/// Deterministic VP update driven by a noise prediction:
///   x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_t)
Vector ddim_step(const Vector& x_t, const Vector& eps, double alpha_t, double alpha_bar_t);

/// D(x; sigma) in the EDM (x0-like) parameterization.
using DenoiserFn = std::function<Vector(const Vector& x, double sigma)>;

struct SolverStep {
    Vector x;
    int evals = 0;
};

/// One Euler step of the probability-flow ODE dx/dsigma = (x - D(x; sigma)) / sigma.
SolverStep euler_step(const Vector& x, double sigma_from, double sigma_to,
                      const DenoiserFn& denoiser);

/// EDM second-order step: Euler predictor, trapezoidal corrector. The
/// corrector is skipped when sigma_to == 0.
SolverStep heun_step(const Vector& x, double sigma_from, double sigma_to,
                     const DenoiserFn& denoiser);

}  // namespace gfcg
