#include "gfcg/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gfcg/errors.hpp"

namespace gfcg {

namespace {

constexpr double kSumTolerance = 1e-12;

void validate_covariance(const Matrix& cov, int dimension, const std::string& where) {
    if (cov.rows() != dimension || cov.cols() != dimension)
        throw ConfigError(where + ".covariance", "must be " + std::to_string(dimension) + "x" +
                                                     std::to_string(dimension));
    if (!cov.allFinite()) throw ConfigError(where + ".covariance", "must be finite");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSumTolerance)
        throw ConfigError(where + ".covariance", "must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0))
        throw ConfigError(where + ".covariance", "must be positive definite");
}

}  // namespace

MixtureWorld::MixtureWorld(std::vector<double> priors, std::vector<ClassMixture> classes)
    : priors_(std::move(priors)), classes_(std::move(classes)) {
    if (classes_.empty()) throw ConfigError("world.classes", "at least one class required");
    if (priors_.size() != classes_.size())
        throw ConfigError("world.priors", "one prior per class required");
    double prior_sum = 0.0;
    for (double p : priors_) {
        if (!(p > 0.0) || !std::isfinite(p)) throw ConfigError("world.priors", "must be positive");
        prior_sum += p;
    }
    if (std::abs(prior_sum - 1.0) > kSumTolerance)
        throw ConfigError("world.priors", "must sum to 1");

    const auto& first = classes_.front().components;
    if (first.empty()) throw ConfigError("world.class.0", "at least one component required");
    dimension_ = static_cast<int>(first.front().mean.size());
    if (dimension_ < 1) throw ConfigError("world.dimension", "must be positive");

    for (std::size_t c = 0; c < classes_.size(); ++c) {
        const std::string where = "world.class." + std::to_string(c);
        const auto& comps = classes_[c].components;
        if (comps.empty()) throw ConfigError(where, "at least one component required");
        double weight_sum = 0.0;
        for (std::size_t k = 0; k < comps.size(); ++k) {
            const std::string cw = where + ".component." + std::to_string(k);
            const auto& comp = comps[k];
            if (!(comp.weight > 0.0) || !std::isfinite(comp.weight))
                throw ConfigError(cw + ".weight", "must be positive");
            if (comp.mean.size() != dimension_)
                throw ConfigError(cw + ".mean", "must have dimension " + std::to_string(dimension_));
            if (!comp.mean.allFinite()) throw ConfigError(cw + ".mean", "must be finite");
            validate_covariance(comp.covariance, dimension_, cw);
            weight_sum += comp.weight;
        }
        if (std::abs(weight_sum - 1.0) > kSumTolerance)
            throw ConfigError(where + ".weight", "component weights must sum to 1");
    }

    for (std::size_t c = 0; c < classes_.size(); ++c)
        for (const auto& comp : classes_[c].components)
            marginal_.components.push_back({priors_[c] * comp.weight, comp.mean, comp.covariance});
}

const ClassMixture& MixtureWorld::mixture(int c) const {
    if (c == kUnconditional) return marginal_;
    if (c < 0 || c >= class_count())
        throw std::invalid_argument("class " + std::to_string(c) + " out of range");
    return classes_[static_cast<std::size_t>(c)];
}

bool MixtureWorld::operator==(const MixtureWorld& other) const {
    if (priors_ != other.priors_ || classes_.size() != other.classes_.size()) return false;
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        const auto& a = classes_[c].components;
        const auto& b = other.classes_[c].components;
        if (a.size() != b.size()) return false;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (a[k].weight != b[k].weight || a[k].mean != b[k].mean ||
                a[k].covariance != b[k].covariance)
                return false;
        }
    }
    return true;
}

MixtureWorld make_fixture(std::string_view name) {
    if (name == "overlap-2") {
        const Matrix eye = Matrix::Identity(2, 2);
        ClassMixture left{{{1.0, Vector{{-1.5, 0.0}}, eye}}};
        ClassMixture right{{{1.0, Vector{{1.5, 0.0}}, eye}}};
        return MixtureWorld({0.5, 0.5}, {left, right});
    }
    if (name == "ring-8") {
        // Each class: an inner isotropic blob and an outer blob stretched along
        // the tangent, so the class mean sits on the radius-3 circle.
        constexpr int kClasses = 8;
        std::vector<ClassMixture> classes;
        for (int k = 0; k < kClasses; ++k) {
            const double theta = 2.0 * std::numbers::pi * k / kClasses;
            const Vector radial{{std::cos(theta), std::sin(theta)}};
            const Vector tangent{{-std::sin(theta), std::cos(theta)}};
            Matrix outer_cov = 0.10 * radial * radial.transpose() + 0.35 * tangent * tangent.transpose();
            outer_cov = 0.5 * (outer_cov + outer_cov.transpose()).eval();
            ClassMixture mix;
            mix.components.push_back({0.5, 2.75 * radial, 0.15 * Matrix::Identity(2, 2)});
            mix.components.push_back({0.5, 3.25 * radial, outer_cov});
            classes.push_back(std::move(mix));
        }
        return MixtureWorld(std::vector<double>(kClasses, 1.0 / kClasses), std::move(classes));
    }
    throw ConfigError("world.fixture", "unknown fixture '" + std::string(name) + "'");
}

std::vector<Vector> sample_data(const MixtureWorld& world, int c, int n, Rng& rng) {
    if (c < 0 || c >= world.class_count())
        throw std::invalid_argument("sample_data: class " + std::to_string(c) + " out of range");
    if (n < 1) throw std::invalid_argument("sample_data: n must be >= 1");
    const auto& comps = world.mixture(c).components;
    std::vector<Matrix> factors;
    factors.reserve(comps.size());
    for (const auto& comp : comps) factors.push_back(comp.covariance.llt().matrixL());

    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        std::size_t k = 0;
        double acc = comps[0].weight;
        while (u >= acc && k + 1 < comps.size()) acc += comps[++k].weight;
        out.push_back(comps[k].mean + factors[k] * rng.normal_vector(world.dimension()));
    }
    return out;
}

ClassMixture diffuse(const ClassMixture& clean, NoiseLevel level) {
    ClassMixture out;
    out.components.reserve(clean.components.size());
    for (const auto& comp : clean.components) {
        const auto d = comp.mean.size();
        out.components.push_back({comp.weight, level.scale * comp.mean,
                                  level.scale * level.scale * comp.covariance +
                                      level.noise * level.noise * Matrix::Identity(d, d)});
    }
    return out;
}

ClassMixture diffused_mixture(const MixtureWorld& world, int c, const NoiseSchedule& schedule,
                              int t) {
    if (t < 0 || t > schedule.steps())
        throw std::invalid_argument("diffused_mixture: t out of range");
    if (t == 0) return world.mixture(c);
    return diffuse(world.mixture(c), schedule.level(t));
}

void DegradationParams::validate() const {
    if (!(mean_jitter >= 0.0) || !std::isfinite(mean_jitter))
        throw ConfigError("mean_jitter", "must be >= 0");
    if (!(cov_inflation >= 1.0) || !std::isfinite(cov_inflation))
        throw ConfigError("cov_inflation", "must be >= 1");
    if (!(weight_smoothing >= 0.0 && weight_smoothing <= 1.0))
        throw ConfigError("weight_smoothing", "must lie in [0, 1]");
}

MixtureWorld degrade_model(const MixtureWorld& world, const DegradationParams& params) {
    params.validate();
    Rng rng(params.jitter_seed, Stream::jitter);
    std::vector<ClassMixture> classes = world.classes();
    for (auto& mix : classes) {
        const double uniform = 1.0 / static_cast<double>(mix.components.size());
        for (auto& comp : mix.components) {
            if (params.mean_jitter > 0.0)
                comp.mean += params.mean_jitter * rng.normal_vector(comp.mean.size());
            if (params.cov_inflation != 1.0) comp.covariance *= params.cov_inflation;
            if (params.weight_smoothing > 0.0)
                comp.weight = (1.0 - params.weight_smoothing) * comp.weight +
                              params.weight_smoothing * uniform;
        }
    }
    try {
        return MixtureWorld(world.priors(), std::move(classes));
    } catch (const ConfigError& e) {
        throw std::logic_error(std::string("degraded world violates invariants: ") + e.what());
    }
}

MixtureDensity::MixtureDensity(const ClassMixture& mixture) {
    dimension_ = static_cast<int>(mixture.components.front().mean.size());
    for (const auto& comp : mixture.components) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(comp.covariance);
        parts_.push_back({std::log(comp.weight), comp.mean, eig.eigenvectors(), eig.eigenvalues()});
    }
}

MixtureDensity::Evaluation MixtureDensity::evaluate(const Vector& x, NoiseLevel level) const {
    if (x.size() != dimension_) throw std::invalid_argument("point dimension mismatch");
    const double a2 = level.scale * level.scale;
    const double n2 = level.noise * level.noise;
    const double log_norm = 0.5 * dimension_ * std::log(2.0 * std::numbers::pi);

    Evaluation ev;
    ev.log_terms.reserve(parts_.size());
    ev.gradients.reserve(parts_.size());
    for (const auto& p : parts_) {
        const Vector var = a2 * p.spectrum.array() + n2;
        const Vector z = p.basis.transpose() * (x - level.scale * p.mean);
        const Vector zw = z.cwiseQuotient(var);
        const double quad = z.dot(zw);
        ev.log_terms.push_back(p.log_weight - log_norm - 0.5 * var.array().log().sum() - 0.5 * quad);
        ev.gradients.push_back(-(p.basis * zw));
    }
    const double peak = *std::max_element(ev.log_terms.begin(), ev.log_terms.end());
    double acc = 0.0;
    for (double lt : ev.log_terms) acc += std::exp(lt - peak);
    ev.log_total = peak + std::log(acc);
    return ev;
}

double MixtureDensity::log_density(const Vector& x, NoiseLevel level) const {
    return evaluate(x, level).log_total;
}

Vector MixtureDensity::score(const Vector& x, NoiseLevel level) const {
    const auto ev = evaluate(x, level);
    Vector s = Vector::Zero(dimension_);
    for (std::size_t k = 0; k < parts_.size(); ++k)
        s += std::exp(ev.log_terms[k] - ev.log_total) * ev.gradients[k];
    return s;
}

Matrix MixtureDensity::score_jacobian(const Vector& x, NoiseLevel level) const {
    const auto ev = evaluate(x, level);
    const double a2 = level.scale * level.scale;
    const double n2 = level.noise * level.noise;
    Vector s = Vector::Zero(dimension_);
    Matrix h = Matrix::Zero(dimension_, dimension_);
    for (std::size_t k = 0; k < parts_.size(); ++k) {
        const double r = std::exp(ev.log_terms[k] - ev.log_total);
        const auto& p = parts_[k];
        const Vector inv_var = (a2 * p.spectrum.array() + n2).inverse();
        const Matrix precision = p.basis * inv_var.asDiagonal() * p.basis.transpose();
        h += r * (ev.gradients[k] * ev.gradients[k].transpose() - precision);
        s += r * ev.gradients[k];
    }
    h -= s * s.transpose();
    return 0.5 * (h + h.transpose());
}

Vector convert_output(const Vector& output, Parameterization from, Parameterization to,
                      const Vector& x, NoiseLevel level) {
    if (output.size() != x.size()) throw std::invalid_argument("convert_output: dimension mismatch");
    const bool from_noise = from == Parameterization::noise_prediction;
    const bool to_noise = to == Parameterization::noise_prediction;
    if (from_noise == to_noise) return output;
    if (!(level.noise > 0.0))
        throw std::invalid_argument("convert_output: noise prediction undefined at zero noise");
    if (from_noise) return (x - level.noise * output) / level.scale;
    return (x - level.scale * output) / level.noise;
}

DenoiserModel::DenoiserModel(MixtureWorld world, Parameterization parameterization,
                             ModelRole role, std::optional<DegradationParams> degradation)
    : world_(std::move(world)),
      parameterization_(parameterization),
      role_(role),
      degradation_(std::move(degradation)) {
    densities_.reserve(static_cast<std::size_t>(world_.class_count()) + 1);
    for (int c = 0; c < world_.class_count(); ++c) densities_.emplace_back(world_.mixture(c));
    densities_.emplace_back(world_.mixture(kUnconditional));
}

DenoiserModel DenoiserModel::main(const MixtureWorld& world, Parameterization parameterization) {
    return DenoiserModel(world, parameterization, ModelRole::main, std::nullopt);
}

DenoiserModel DenoiserModel::guidance(const MixtureWorld& world, Parameterization parameterization,
                                      std::optional<DegradationParams> degradation) {
    if (degradation) return DenoiserModel(degrade_model(world, *degradation), parameterization,
                                          ModelRole::guidance, degradation);
    return DenoiserModel(world, parameterization, ModelRole::guidance, std::nullopt);
}

const MixtureDensity& DenoiserModel::density(int c) const {
    if (c == kUnconditional) return densities_.back();
    if (c < 0 || c >= world_.class_count())
        throw std::invalid_argument("class " + std::to_string(c) + " out of range");
    return densities_[static_cast<std::size_t>(c)];
}

double DenoiserModel::log_density(int c, const Vector& x, NoiseLevel level) const {
    return density(c).log_density(x, level);
}

Vector DenoiserModel::score(int c, const Vector& x, NoiseLevel level) const {
    return density(c).score(x, level);
}

Matrix DenoiserModel::score_jacobian(int c, const Vector& x, NoiseLevel level) const {
    return density(c).score_jacobian(x, level);
}

Vector DenoiserModel::posterior_mean(int c, const Vector& x, NoiseLevel level) const {
    // Tweedie: E[x0 | x_t] = (x_t + noise^2 * score) / scale.
    return (x + level.noise * level.noise * score(c, x, level)) / level.scale;
}

Vector DenoiserModel::evaluate(int c, const Vector& x, NoiseLevel level) const {
    if (parameterization_ == Parameterization::noise_prediction)
        return -level.noise * score(c, x, level);
    return posterior_mean(c, x, level);
}

Vector denoise_exact(const DenoiserModel& model, int c, const Vector& x,
                     const NoiseSchedule& schedule, int t) {
    if (t < 1 || t > schedule.steps())
        throw std::invalid_argument("denoise_exact: t must lie in [1, T]");
    return model.evaluate(c, x, schedule.level(t));
}

}  // namespace gfcg
