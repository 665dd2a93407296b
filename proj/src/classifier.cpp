#include "gfcg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gfcg/errors.hpp"

namespace gfcg {

namespace {
constexpr NoiseLevel kClean{1.0, 0.0};
}

ClassifierModel::ClassifierModel(const MixtureWorld& world, double temperature,
                                 double label_noise)
    : temperature_(temperature), label_noise_(label_noise) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ConfigError("temperature", "must be positive");
    if (!(label_noise >= 0.0 && label_noise < 1.0))
        throw ConfigError("label_noise", "must lie in [0, 1)");
    for (int c = 0; c < world.class_count(); ++c) {
        log_priors_.push_back(std::log(world.priors()[static_cast<std::size_t>(c)]));
        densities_.emplace_back(world.mixture(c));
    }
}

Vector ClassifierModel::tempered_softmax(const Vector& x) const {
    if (!x.allFinite()) throw std::invalid_argument("classifier: input must be finite");
    const int n = class_count();
    Vector logits(n);
    for (int c = 0; c < n; ++c) {
        const auto i = static_cast<std::size_t>(c);
        logits[c] = (log_priors_[i] + densities_[i].log_density(x, kClean)) / temperature_;
    }
    const double peak = logits.maxCoeff();
    Vector q = (logits.array() - peak).exp();
    return q / q.sum();
}

Vector ClassifierModel::posterior(const Vector& x) const {
    const Vector q = tempered_softmax(x);
    if (label_noise_ == 0.0) return q;
    return (1.0 - label_noise_) * q.array() + label_noise_ / class_count();
}

Vector ClassifierModel::log_posterior_gradient(int c, const Vector& x) const {
    if (c < 0 || c >= class_count()) throw std::invalid_argument("classifier: class out of range");
    const Vector q = tempered_softmax(x);
    std::vector<Vector> grads;
    Vector mean_grad = Vector::Zero(x.size());
    for (int j = 0; j < class_count(); ++j) {
        grads.push_back(densities_[static_cast<std::size_t>(j)].score(x, kClean));
        mean_grad += q[j] * grads.back();
    }
    // grad q_c = q_c (grad l_c - sum_j q_j grad l_j) / temperature
    const Vector grad_q = q[c] * (grads[static_cast<std::size_t>(c)] - mean_grad) / temperature_;
    const double p = (1.0 - label_noise_) * q[c] + label_noise_ / class_count();
    return (1.0 - label_noise_) * grad_q / p;
}

int ClassifierModel::predict(const Vector& x) const {
    const Vector p = posterior(x);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return static_cast<int>(best);
}

std::pair<int, int> top_two(std::span<const double> probs) {
    if (probs.size() < 2) throw std::invalid_argument("top_two: need at least two classes");
    int first = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[static_cast<std::size_t>(first)]) first = static_cast<int>(i);
    int second = first == 0 ? 1 : 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (static_cast<int>(i) == first) continue;
        if (probs[i] > probs[static_cast<std::size_t>(second)]) second = static_cast<int>(i);
    }
    return {first, second};
}

}  // namespace gfcg
