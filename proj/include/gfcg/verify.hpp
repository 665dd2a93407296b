#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gfcg/classifier.hpp"
#include "gfcg/schedules.hpp"
#include "gfcg/world.hpp"

// Brute-force oracles. Nothing here calls into the closed-form machinery it
// is used to check: densities, log-sum-exp and sampling are recoded.
namespace gfcg::verify {

/// log p_t(x | c) of the diffused class mixture at schedule step t.
double log_density(const MixtureWorld& world, int cls, const Vector& x,
                   const NoiseSchedule& schedule, int t);

/// Central differences of log p_t(x | c), coordinate-wise.
Vector finite_difference_score(const MixtureWorld& world, int cls, const Vector& x,
                               const NoiseSchedule& schedule, int t, double h);

/// Central-difference gradient of an arbitrary scalar function.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double h);

struct McEstimate {
    Vector estimate;
    Vector standard_error;
    double effective_sample_size = 0.0;
    bool low_ess = false;  // ESS < 100
};

/// Self-normalized importance estimate of E[x_0 | x_t, c]: x_0 drawn from the
/// clean class mixture, weighted by the forward kernel density at x_t.
McEstimate mc_posterior_mean(const MixtureWorld& world, int cls, const Vector& x_t,
                             const NoiseSchedule& schedule, int t, int n, std::uint64_t seed);

/// Steps t in [1, t_s] with (t_s - t) mod s_cp == 0, descending.
std::vector<int> enumerate_cadence(int t_s, int s_cp, int steps);

/// P(classifier argmax == cls | x ~ p_0(x | cls)) by midpoint quadrature on a
/// 2-D grid covering +-`half_widths` standard deviations around the class.
double quadrature_precision(const MixtureWorld& world, const ClassifierModel& classifier, int cls,
                            int cells_per_axis = 600, double half_widths = 9.0);

/// Exact probability-flow ODE solution for a 1-D Gaussian N(mean, var) under
/// VE noise: x(sigma) = mean + (x - mean) sqrt((var + sigma^2) / (var + sigma_from^2)).
double gaussian_flow(double mean, double var, double x, double sigma_from, double sigma_to);

struct OracleCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteOptions {
    int score_probes = 200;
    int posterior_probes = 20;
    int posterior_draws = 1'000'000;
    std::uint64_t seed = 20240611;
};

/// The oracle-agreement suite behind the `verify` subcommand.
std::vector<OracleCheck> run_oracle_suite(const SuiteOptions& options);

}  // namespace gfcg::verify
