#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gfcg/classifier.hpp"
#include "gfcg/world.hpp"

namespace gfcg {

struct LabeledSample {
    Vector x;
    int c_des = 0;
};

struct GaussianFit {
    Vector mean;
    Matrix covariance;
    bool degenerate = false;  // covariance is (numerically) singular
};

/// Sample mean and unbiased sample covariance; needs at least two points.
GaussianFit fit_gaussian(std::span<const Vector> points);

/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), with the square root taken
/// through the symmetric product S1^(1/2) S2 S1^(1/2).
double frechet_gaussian(const Vector& mean1, const Matrix& cov1, const Vector& mean2,
                        const Matrix& cov2);

/// Fraction of samples whose classifier argmax is their desired class.
double precision(std::span<const LabeledSample> samples, const ClassifierModel& classifier);

/// Fits one Gaussian per class to the generated points (covariance + 1e-6 I),
/// and reports the accuracy of the induced uniform-prior Bayes classifier on
/// the real points.
double recall_proxy(const std::vector<std::vector<Vector>>& real,
                    const std::vector<std::vector<Vector>>& generated);

struct ClassSummary {
    int cls = 0;
    int count = 0;
    double precision = 0.0;
    std::optional<double> frechet;
};

struct MetricsReport {
    double precision = 0.0;
    std::optional<double> recall;
    double frechet = 0.0;  // pooled generated vs pooled real
    std::vector<ClassSummary> per_class;
    double nfe_mean = 0.0;
    int chains = 0;
};

/// Full evaluation of a finished batch against a fresh real reference sample
/// drawn from `world` with `reference_seed`, one real point per generated point
/// of each desired class.
MetricsReport evaluate_samples(std::span<const LabeledSample> samples, std::span<const int> nfe,
                               const MixtureWorld& world, const ClassifierModel& classifier,
                               std::uint64_t reference_seed);

}  // namespace gfcg
