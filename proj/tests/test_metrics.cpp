#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gfcg/metrics.hpp"
#include "gfcg/samplers.hpp"
#include "gfcg/verify.hpp"

using namespace gfcg;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

MixtureWorld separated() {
    const Component a{1.0, vec({-10.0, 0.0}), Matrix::Identity(2, 2)};
    const Component b{1.0, vec({10.0, 0.0}), Matrix::Identity(2, 2)};
    return MixtureWorld({0.5, 0.5}, {ClassMixture{{a}}, ClassMixture{{b}}});
}

}  // namespace

TEST_CASE("fit_gaussian") {
    const std::vector<Vector> two{vec({0.0, 0.0}), vec({2.0, 0.0})};
    const auto fit = fit_gaussian(two);
    CHECK(fit.mean == vec({1.0, 0.0}));
    CHECK(fit.covariance(0, 0) == doctest::Approx(2.0));
    const std::vector<Vector> same(5, vec({1.0, 2.0}));
    const auto flat = fit_gaussian(same);
    CHECK(flat.covariance.isZero());
    CHECK(flat.degenerate);
    const std::vector<Vector> one{vec({1.0, 2.0})};
    CHECK_THROWS_AS(fit_gaussian(one), std::invalid_argument);

    Rng rng(1);
    std::vector<Vector> pts;
    for (int i = 0; i < 100000; ++i) pts.push_back(vec({rng.normal(), 2.0 * rng.normal()}));
    const auto big = fit_gaussian(pts);
    CHECK(std::abs(big.covariance(0, 0) - 1.0) < 0.05);
    CHECK(std::abs(big.covariance(1, 1) - 4.0) < 0.05);
    CHECK(std::abs(big.covariance(0, 1)) < 0.05);
}

TEST_CASE("frechet_gaussian") {
    const Matrix i2 = Matrix::Identity(2, 2);
    CHECK(frechet_gaussian(vec({1.0, 2.0}), i2, vec({1.0, 2.0}), i2) == doctest::Approx(0.0));
    CHECK(frechet_gaussian(vec({0.0, 0.0}), i2, vec({3.0, 0.0}), i2) == doctest::Approx(9.0));
    CHECK(frechet_gaussian(vec({0.0, 0.0}), 4.0 * i2, vec({0.0, 0.0}), i2) == doctest::Approx(2.0));
    Matrix bad = i2;
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(frechet_gaussian(vec({0.0, 0.0}), bad, vec({0.0, 0.0}), i2), std::invalid_argument);

    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        Matrix a = Matrix::Random(2, 2);
        Matrix b = Matrix::Random(2, 2);
        const Matrix s1 = a * a.transpose() + 0.1 * i2;
        const Matrix s2 = b * b.transpose() + 0.1 * i2;
        const Vector m1 = rng.normal_vector(2);
        const Vector m2 = rng.normal_vector(2);
        const double ab = frechet_gaussian(m1, s1, m2, s2);
        const double ba = frechet_gaussian(m2, s2, m1, s1);
        CHECK(std::abs(ab - ba) < 1e-10);
        CHECK(ab > 0.0);
        CHECK(std::abs(frechet_gaussian(m1, s1, m1, s1)) < 1e-10);
    }
}

TEST_CASE("precision") {
    const auto w = separated();
    const ClassifierModel c(w);
    const std::vector<LabeledSample> at_means{{vec({-10.0, 0.0}), 0}, {vec({10.0, 0.0}), 1}};
    CHECK(precision(at_means, c) == 1.0);
    const std::vector<LabeledSample> half{{vec({-10.0, 0.0}), 0}, {vec({-10.0, 0.0}), 1}};
    CHECK(precision(half, c) == 0.5);
    CHECK_THROWS_AS(precision(std::vector<LabeledSample>{}, c), std::invalid_argument);

    std::vector<LabeledSample> mixed;
    Rng rng(3);
    for (int i = 0; i < 200; ++i) mixed.push_back({12.0 * rng.normal_vector(2), i % 2});
    const double before = precision(mixed, c);
    std::reverse(mixed.begin(), mixed.end());
    CHECK(precision(mixed, c) == before);
}

TEST_CASE("recall proxy") {
    const auto w = separated();
    Rng rng(4);
    std::vector<std::vector<Vector>> real;
    std::vector<std::vector<Vector>> gen;
    for (int c = 0; c < 2; ++c) {
        real.push_back(sample_data(w, c, 2000, rng));
        gen.push_back(sample_data(w, c, 2000, rng));
    }
    const double r = recall_proxy(real, gen);
    CHECK(r >= 0.95);
    CHECK(recall_proxy(real, gen) == r);
    CHECK(recall_proxy(real, real) >= 0.95);

    // Collapsed generators: three identical points per class at the means.
    std::vector<std::vector<Vector>> collapsed(2);
    for (int k = 0; k < 4; ++k) {
        collapsed[0].push_back(vec({-10.0, 0.0}));
        collapsed[1].push_back(vec({10.0, 0.0}));
    }
    int nearest = 0;
    int total = 0;
    for (int c = 0; c < 2; ++c)
        for (const auto& x : real[static_cast<std::size_t>(c)]) {
            const int guess = (x - vec({-10.0, 0.0})).norm() < (x - vec({10.0, 0.0})).norm() ? 0 : 1;
            nearest += guess == c;
            ++total;
        }
    CHECK(recall_proxy(real, collapsed) == doctest::Approx(static_cast<double>(nearest) / total));

    std::vector<std::vector<Vector>> thin = gen;
    thin[1].resize(3);
    try {
        recall_proxy(real, thin);
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
}

TEST_CASE("unguided precision matches quadrature of the sampled density") {
    const auto w = make_fixture("overlap-2");
    const ClassifierModel classifier(w);
    const double quad = 0.5 * (verify::quadrature_precision(w, classifier, 0) +
                               verify::quadrature_precision(w, classifier, 1));
    CHECK(quad == doctest::Approx(0.9331927987311419).epsilon(1e-4));

    const ModelSet models{DenoiserModel::main(w, Parameterization::edm_d), std::nullopt, classifier};
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const GuidedDenoiser den(GuidanceConfig{}, models, ve);
    const auto chains = run_batch(den, {}, ClassPolicy{}, 5000, 31);
    std::vector<LabeledSample> samples;
    std::vector<int> nfe;
    for (const auto& c : chains) {
        samples.push_back({c.final_sample, c.c_des});
        nfe.push_back(c.nfe_total);
    }
    const auto report = evaluate_samples(samples, nfe, w, classifier, 5);
    CHECK(std::abs(report.precision - quad) < 0.02);
    CHECK(report.nfe_mean == 63.0);
    CHECK(report.chains == 5000);
    REQUIRE(report.recall.has_value());
    CHECK(std::abs(*report.recall - quad) < 0.02);
    CHECK(report.frechet < 0.02);
    REQUIRE(report.per_class.size() == 2);
    CHECK(report.per_class[0].count == 2500);
    const auto again = evaluate_samples(samples, nfe, w, classifier, 5);
    CHECK(again.frechet == report.frechet);
}
