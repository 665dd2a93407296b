#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gfcg/world.hpp"

namespace gfcg {

/// Bayes posterior over the clean data distribution. `temperature` softens
/// the log-posteriors; `label_noise` blends the result toward uniform.
class ClassifierModel {
public:
    explicit ClassifierModel(const MixtureWorld& world, double temperature = 1.0,
                             double label_noise = 0.0);

    int class_count() const { return static_cast<int>(densities_.size()); }
    double temperature() const { return temperature_; }
    double label_noise() const { return label_noise_; }

    /// p(c | x) for every class; evaluated on the clean (t = 0) densities.
    Vector posterior(const Vector& x) const;
    /// grad_x log p(c | x).
    Vector log_posterior_gradient(int c, const Vector& x) const;
    /// Argmax of the posterior, ties to the lowest index.
    int predict(const Vector& x) const;

private:
    Vector tempered_softmax(const Vector& x) const;

    std::vector<double> log_priors_;
    std::vector<MixtureDensity> densities_;
    double temperature_;
    double label_noise_;
};

/// Indices of the largest and second-largest entries, ties to the lowest index.
std::pair<int, int> top_two(std::span<const double> probs);

}  // namespace gfcg
