#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gfcg/rng.hpp"
#include "gfcg/schedules.hpp"

namespace gfcg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Class index used to request the class-marginal (unconditional) mixture.
inline constexpr int kUnconditional = -1;

struct Component {
    double weight = 1.0;
    Vector mean;
    Matrix covariance;
};

struct ClassMixture {
    std::vector<Component> components;
};

/// Class-conditional Gaussian-mixture data distribution. Validated on
/// construction: priors and per-class weights sum to 1, covariances are
/// symmetric positive definite.
class MixtureWorld {
public:
    MixtureWorld(std::vector<double> priors, std::vector<ClassMixture> classes);

    int dimension() const { return dimension_; }
    int class_count() const { return static_cast<int>(classes_.size()); }
    const std::vector<double>& priors() const { return priors_; }
    const std::vector<ClassMixture>& classes() const { return classes_; }

    /// Mixture for class `c`, or the prior-weighted marginal for kUnconditional.
    const ClassMixture& mixture(int c) const;

    bool operator==(const MixtureWorld& other) const;

private:
    int dimension_ = 0;
    std::vector<double> priors_;
    std::vector<ClassMixture> classes_;
    ClassMixture marginal_;
};

/// Built-in worlds: "overlap-2" and "ring-8". Throws ConfigError otherwise.
MixtureWorld make_fixture(std::string_view name);

/// i.i.d. draws from the class mixture.
std::vector<Vector> sample_data(const MixtureWorld& world, int c, int n, Rng& rng);

/// Forward marginal p_t(x | c): components (scale mu, scale^2 Sigma + noise^2 I).
ClassMixture diffuse(const ClassMixture& clean, NoiseLevel level);
ClassMixture diffused_mixture(const MixtureWorld& world, int c, const NoiseSchedule& schedule,
                              int t);

struct DegradationParams {
    double mean_jitter = 0.0;
    double cov_inflation = 1.0;
    double weight_smoothing = 0.0;
    std::uint64_t jitter_seed = 0;

    void validate() const;
    bool operator==(const DegradationParams&) const = default;
};

/// A deliberately worse fit of the same data: means jittered, covariances
/// inflated, weights blended toward uniform.
MixtureWorld degrade_model(const MixtureWorld& world, const DegradationParams& params);

/// Closed-form density, score and score Hessian of a Gaussian mixture
/// diffused to an arbitrary noise level. Covariances are eigendecomposed once
/// so every noise level costs O(K d^2).
class MixtureDensity {
public:
    explicit MixtureDensity(const ClassMixture& mixture);

    double log_density(const Vector& x, NoiseLevel level) const;
    Vector score(const Vector& x, NoiseLevel level) const;
    /// Hessian of log p at x (symmetric).
    Matrix score_jacobian(const Vector& x, NoiseLevel level) const;

private:
    struct Eigencomponent {
        double log_weight;
        Vector mean;
        Matrix basis;   // columns: eigenvectors of Sigma
        Vector spectrum;  // eigenvalues of Sigma
    };

    struct Evaluation {
        std::vector<double> log_terms;
        std::vector<Vector> gradients;  // per-component grad log N
        double log_total;
    };
    Evaluation evaluate(const Vector& x, NoiseLevel level) const;

    std::vector<Eigencomponent> parts_;
    int dimension_;
};

enum class Parameterization { noise_prediction, x0_prediction, edm_d };
enum class ModelRole { main, guidance };

/// Convert a model output between parameterizations at (x, level). All three
/// are affine in the score: x0 = (x + noise^2 s) / scale, eps = -noise s,
/// and D coincides with the x0 prediction.
Vector convert_output(const Vector& output, Parameterization from, Parameterization to,
                      const Vector& x, NoiseLevel level);

/// Exact denoiser of a mixture world. A guidance-role model may carry a
/// degradation, applied to the world at construction.
class DenoiserModel {
public:
    static DenoiserModel main(const MixtureWorld& world, Parameterization parameterization);
    static DenoiserModel guidance(const MixtureWorld& world, Parameterization parameterization,
                                  std::optional<DegradationParams> degradation);

    const MixtureWorld& world() const { return world_; }
    Parameterization parameterization() const { return parameterization_; }
    ModelRole role() const { return role_; }
    const std::optional<DegradationParams>& degradation() const { return degradation_; }

    double log_density(int c, const Vector& x, NoiseLevel level) const;
    Vector score(int c, const Vector& x, NoiseLevel level) const;
    Matrix score_jacobian(int c, const Vector& x, NoiseLevel level) const;

    /// Model output in the declared parameterization.
    Vector evaluate(int c, const Vector& x, NoiseLevel level) const;
    /// Posterior mean E[x_0 | x_t, c].
    Vector posterior_mean(int c, const Vector& x, NoiseLevel level) const;

private:
    DenoiserModel(MixtureWorld world, Parameterization parameterization, ModelRole role,
                  std::optional<DegradationParams> degradation);
    const MixtureDensity& density(int c) const;

    MixtureWorld world_;
    Parameterization parameterization_;
    ModelRole role_;
    std::optional<DegradationParams> degradation_;
    std::vector<MixtureDensity> densities_;  // per class, marginal last
};

/// denoise_exact at schedule step t >= 1.
Vector denoise_exact(const DenoiserModel& model, int c, const Vector& x,
                     const NoiseSchedule& schedule, int t);

}  // namespace gfcg
