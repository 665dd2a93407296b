#include "gfcg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace gfcg {

GaussianFit fit_gaussian(std::span<const Vector> points) {
    if (points.size() < 2) throw std::invalid_argument("fit_gaussian: need at least two points");
    const auto d = points.front().size();
    GaussianFit fit;
    fit.mean = Vector::Zero(d);
    for (const auto& p : points) {
        if (p.size() != d) throw std::invalid_argument("fit_gaussian: dimension mismatch");
        fit.mean += p;
    }
    fit.mean /= static_cast<double>(points.size());
    fit.covariance = Matrix::Zero(d, d);
    for (const auto& p : points) {
        const Vector r = p - fit.mean;
        fit.covariance += r * r.transpose();
    }
    fit.covariance /= static_cast<double>(points.size() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(fit.covariance, Eigen::EigenvaluesOnly);
    const double top = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    fit.degenerate = eig.eigenvalues().minCoeff() <= 1e-12 * top;
    return fit;
}

namespace {

Matrix psd_sqrt(const Matrix& m, const char* name) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(std::string("frechet_gaussian: ") + name + " not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
    const Vector& ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(std::string("frechet_gaussian: ") + name + " not PSD");
    return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
}

double log_gaussian(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& chol) {
    const Vector z = chol.matrixL().solve(x - mean);
    const double log_det = 2.0 * chol.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (z.squaredNorm() + log_det +
                   static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

}  // namespace

double frechet_gaussian(const Vector& mean1, const Matrix& cov1, const Vector& mean2,
                        const Matrix& cov2) {
    if (mean1.size() != mean2.size() || cov1.rows() != mean1.size() || cov2.rows() != mean2.size())
        throw std::invalid_argument("frechet_gaussian: dimension mismatch");
    const Matrix root1 = psd_sqrt(cov1, "cov1");
    psd_sqrt(cov2, "cov2");
    const Matrix inner = root1 * cov2 * root1;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double dist = (mean1 - mean2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * cross;
    return std::max(0.0, dist);
}

double precision(std::span<const LabeledSample> samples, const ClassifierModel& classifier) {
    if (samples.empty()) throw std::invalid_argument("precision: empty sample list");
    std::size_t hits = 0;
    for (const auto& s : samples)
        if (classifier.predict(s.x) == s.c_des) ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double recall_proxy(const std::vector<std::vector<Vector>>& real,
                    const std::vector<std::vector<Vector>>& generated) {
    if (real.size() != generated.size() || generated.size() < 2)
        throw std::invalid_argument("recall_proxy: need matching per-class sets for >= 2 classes");
    std::vector<Vector> means;
    std::vector<Eigen::LLT<Matrix>> factors;
    for (std::size_t c = 0; c < generated.size(); ++c) {
        const auto& pts = generated[c];
        const auto d = pts.empty() ? 0 : pts.front().size();
        if (pts.size() < static_cast<std::size_t>(d) + 2 || pts.empty())
            throw std::invalid_argument("recall_proxy: class " + std::to_string(c) +
                                        " has too few generated points");
        auto fit = fit_gaussian(pts);
        fit.covariance.diagonal().array() += 1e-6;
        means.push_back(fit.mean);
        factors.emplace_back(fit.covariance);
    }
    std::size_t total = 0;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < real.size(); ++c) {
        for (const auto& x : real[c]) {
            std::size_t best = 0;
            double best_ll = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < means.size(); ++j) {
                const double ll = log_gaussian(x, means[j], factors[j]);
                if (ll > best_ll) {
                    best_ll = ll;
                    best = j;
                }
            }
            ++total;
            if (best == c) ++correct;
        }
    }
    if (total == 0) throw std::invalid_argument("recall_proxy: no real points");
    return static_cast<double>(correct) / static_cast<double>(total);
}

MetricsReport evaluate_samples(std::span<const LabeledSample> samples, std::span<const int> nfe,
                               const MixtureWorld& world, const ClassifierModel& classifier,
                               std::uint64_t reference_seed) {
    if (samples.empty()) throw std::invalid_argument("evaluate_samples: empty sample list");
    const int classes = world.class_count();
    const auto d = static_cast<std::size_t>(world.dimension());

    std::vector<std::vector<Vector>> generated(static_cast<std::size_t>(classes));
    for (const auto& s : samples) {
        if (s.c_des < 0 || s.c_des >= classes)
            throw std::invalid_argument("evaluate_samples: desired class out of range");
        generated[static_cast<std::size_t>(s.c_des)].push_back(s.x);
    }
    std::vector<std::vector<Vector>> real(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
        const auto n = generated[static_cast<std::size_t>(c)].size();
        if (n == 0) continue;
        Rng rng(derive_stream(reference_seed, 0x2000ULL + static_cast<std::uint64_t>(c)));
        real[static_cast<std::size_t>(c)] = sample_data(world, c, static_cast<int>(n), rng);
    }

    MetricsReport report;
    report.chains = static_cast<int>(samples.size());
    report.precision = precision(samples, classifier);

    std::vector<Vector> pooled_gen;
    std::vector<Vector> pooled_real;
    for (int c = 0; c < classes; ++c) {
        const auto& gen = generated[static_cast<std::size_t>(c)];
        const auto& ref = real[static_cast<std::size_t>(c)];
        pooled_gen.insert(pooled_gen.end(), gen.begin(), gen.end());
        pooled_real.insert(pooled_real.end(), ref.begin(), ref.end());
        ClassSummary summary;
        summary.cls = c;
        summary.count = static_cast<int>(gen.size());
        if (!gen.empty()) {
            std::size_t hits = 0;
            for (const auto& x : gen) hits += classifier.predict(x) == c ? 1 : 0;
            summary.precision = static_cast<double>(hits) / static_cast<double>(gen.size());
        }
        if (gen.size() >= 2) {
            const auto fg = fit_gaussian(gen);
            const auto fr = fit_gaussian(ref);
            summary.frechet = frechet_gaussian(fg.mean, fg.covariance, fr.mean, fr.covariance);
        }
        report.per_class.push_back(summary);
    }
    if (pooled_gen.size() >= 2) {
        const auto fg = fit_gaussian(pooled_gen);
        const auto fr = fit_gaussian(pooled_real);
        report.frechet = frechet_gaussian(fg.mean, fg.covariance, fr.mean, fr.covariance);
    }

    const bool recall_ok = std::all_of(generated.begin(), generated.end(),
                                       [&](const auto& g) { return g.size() >= d + 2; });
    if (recall_ok && classes >= 2) report.recall = recall_proxy(real, generated);

    if (!nfe.empty()) {
        double acc = 0.0;
        for (int v : nfe) acc += v;
        report.nfe_mean = acc / static_cast<double>(nfe.size());
    }
    return report;
}

}  // namespace gfcg
