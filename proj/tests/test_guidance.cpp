#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "gfcg/errors.hpp"
#include "gfcg/guidance.hpp"
#include "gfcg/solvers.hpp"
#include "gfcg/verify.hpp"

using namespace gfcg;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

DegradationParams inflation(double f) {
    DegradationParams d;
    d.cov_inflation = f;
    return d;
}

ModelSet models_for(const MixtureWorld& w, std::optional<DegradationParams> d = std::nullopt,
                    Parameterization p = Parameterization::edm_d) {
    std::optional<DenoiserModel> degraded;
    if (d) degraded = DenoiserModel::guidance(w, p, d);
    return ModelSet{DenoiserModel::main(w, p), degraded, ClassifierModel(w)};
}

GuidanceConfig gfcg_config(double alpha, double beta, int t_s, int s_cp) {
    GuidanceConfig g;
    g.method = Method::gfcg;
    g.alpha = alpha;
    g.beta = beta;
    g.t_s = t_s;
    g.s_cp = s_cp;
    return g;
}

}  // namespace

TEST_CASE("adaptive scale values") {
    CHECK(adaptive_scale(1.0, 2.5, 1.0, 1.0) == 1.0);
    CHECK(adaptive_scale(0.5, 2.5, 1.0, 1.0) == doctest::Approx(5.121803176750320).epsilon(1e-14));
    CHECK(adaptive_scale(0.2, 0.5, 1.25, 1.0) == doctest::Approx(2.359140914229523).epsilon(1e-14));
}

TEST_CASE("adaptive scale is decreasing below tau and jumps to 1 at tau") {
    for (double tau : {1.0, 0.6}) {
        double prev = INFINITY;
        for (int i = 0; i < 1000; ++i) {
            const double p = i / 999.0;
            const double w = adaptive_scale(p, 0.8, 1.25, tau);
            if (p < tau) {
                CHECK(w < prev);
                CHECK(w > 1.0);
                prev = w;
            } else {
                CHECK(w == 1.0);
            }
        }
        const double below = adaptive_scale(std::nextafter(tau, 0.0), 0.8, 1.25, tau);
        CHECK(below == doctest::Approx(1.8).epsilon(1e-12));
        CHECK(adaptive_scale(tau, 0.8, 1.25, tau) == 1.0);
    }
}

TEST_CASE("reference class selection") {
    const std::array<double, 3> a{0.2, 0.7, 0.1};
    CHECK(select_reference_class(a, 0) == 1);
    const std::array<double, 3> b{0.7, 0.2, 0.1};
    CHECK(select_reference_class(b, 0) == 1);
    const std::array<double, 2> c{0.5, 0.5};
    CHECK(select_reference_class(c, 0) == 1);
    CHECK(select_reference_class(c, 1) == 0);
    const std::array<double, 4> tie{0.1, 0.3, 0.3, 0.3};
    CHECK(select_reference_class(tie, 1) == 2);
    CHECK(select_reference_class(tie, 0) == 1);
    const std::array<double, 1> one{1.0};
    CHECK_THROWS_AS(select_reference_class(one, 0), std::invalid_argument);
}

TEST_CASE("stochastic reference frequencies") {
    Rng rng(99);
    const std::array<double, 2> two{0.9, 0.1};
    for (int i = 0; i < 1000; ++i) CHECK(sample_reference_class(two, 0, rng) == 1);

    const std::array<double, 3> p{0.5, 0.3, 0.2};
    std::array<int, 3> counts{};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_reference_class(p, 0, rng))];
    CHECK(counts[0] == 0);
    const double e1 = 0.6 * n;
    const double e2 = 0.4 * n;
    const double chi2 = (counts[1] - e1) * (counts[1] - e1) / e1 + (counts[2] - e2) * (counts[2] - e2) / e2;
    CHECK(chi2 < 10.828);  // chi-square(1) critical value at 0.001

    const std::array<double, 3> degenerate{1.0, 0.0, 0.0};
    CHECK_THROWS_AS(sample_reference_class(degenerate, 0, rng), std::domain_error);
}

TEST_CASE("combine") {
    const Vector d1 = vec({1.0, -2.0});
    CHECK(combine(d1, vec({7.0, 3.0}), 1.0) == d1);
    CHECK(combine(vec({1.0}), vec({0.4}), 2.0)[0] == doctest::Approx(1.6).epsilon(1e-15));
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vector a = rng.normal_vector(2);
        const Vector b = rng.normal_vector(2);
        const Vector out = combine(a, b, 2.45);
        for (int j = 0; j < 2; ++j) CHECK(out[j] == doctest::Approx(2.45 * a[j] - 1.45 * b[j]).epsilon(1e-14));
    }
    CHECK_THROWS_AS(combine(vec({1.0}), vec({1.0, 2.0}), 2.0), std::invalid_argument);
}

TEST_CASE("single-step x0 estimate") {
    CHECK(estimate_x0_single(vec({0.3}), vec({5.0}), 1.0)[0] == 0.3);
    CHECK(estimate_x0_single(vec({0.3}), vec({0.0}), 0.25)[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(estimate_x0_single(vec({1.0}), vec({0.5}), 0.25)[0] ==
          doctest::Approx(1.133974596215561).epsilon(1e-14));
    CHECK_THROWS_AS(estimate_x0_single(vec({1.0}), vec({0.5}), 0.0), std::invalid_argument);
}

TEST_CASE("multistep x0 estimate") {
    const auto world = make_fixture("overlap-2");
    const auto models = models_for(world);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    GuidanceConfig cfg = gfcg_config(0.5, 1.25, 17, 32);
    cfg.x0_estimate = X0Estimate::multistep;
    const GuidedDenoiser den(cfg, models, ve);
    const auto lv = ve.level(17);
    const Vector x = vec({0.4, -1.1});

    const auto four = den.estimate_x0_multistep(x, lv, 0, BaseMethod::ng, {4, 0.002, 7.0});
    CHECK(four.extra_nfe == 7);
    const auto two = den.estimate_x0_multistep(x, lv, 0, BaseMethod::ng, {2, 1.0, 7.0});
    CHECK(two.extra_nfe == 3);
    const auto one = den.estimate_x0_multistep(x, lv, 0, BaseMethod::ng, {1, 0.002, 7.0});
    CHECK(one.extra_nfe == 1);
    // One Euler step to sigma = 0 lands on D(x; sigma).
    const Vector d = models.main.evaluate(0, x, lv);
    CHECK((one.x0 - d).norm() < 1e-12);

    // More inner steps approach the exact flow endpoint.
    const auto many = den.estimate_x0_multistep(x, lv, 0, BaseMethod::ng, {64, 0.002, 7.0});
    const auto more = den.estimate_x0_multistep(x, lv, 0, BaseMethod::ng, {128, 0.002, 7.0});
    CHECK((many.x0 - more.x0).norm() < 1e-3);
}

TEST_CASE("mixed gfcg follows the base method above t_s") {
    const auto world = make_fixture("overlap-2");
    const auto models = models_for(world, inflation(1.5));
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    GuidanceConfig mixed = gfcg_config(0.8, 1.25, 17, 32);
    mixed.method = Method::gfcg_mixed;
    mixed.base = BaseMethod::atg;
    mixed.omega_atg = 2.45;
    GuidanceConfig atg;
    atg.method = Method::atg;
    atg.omega_atg = 2.45;
    const GuidedDenoiser m(mixed, models, ve);
    const GuidedDenoiser a(atg, models, ve);
    Rng rng(1);
    for (int t = 32; t > 17; --t) {
        const Vector x = ve.sigma(t) * rng.normal_vector(2);
        CadenceMemory mm;
        CadenceMemory am;
        Rng r1(5);
        Rng r2(5);
        const auto om = guided_denoise(m, x, t, 1, mm, r1);
        const auto oa = guided_denoise(a, x, t, 1, am, r2);
        CHECK(om.d_hat == oa.d_hat);
        CHECK_FALSE(om.diagnostics.guidance_active);
        CHECK_FALSE(om.diagnostics.classifier_invoked);
    }
}

TEST_CASE("gfcg with p_des >= tau is the plain conditional output") {
    const auto world = make_fixture("overlap-2");
    const auto models = models_for(world);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    GuidanceConfig cfg = gfcg_config(2.0, 1.0, 32, 1);
    cfg.tau = 0.0;
    const GuidedDenoiser den(cfg, models, ve);
    Rng rng(2);
    for (int t = 32; t >= 1; --t) {
        const Vector x = ve.sigma(t) * rng.normal_vector(2);
        CadenceMemory mem;
        const auto out = guided_denoise(den, x, t, 0, mem, rng);
        CHECK(out.d_hat == models.main.evaluate(0, x, ve.level(t)));
        CHECK(out.nfe_increment == 1);
        CHECK(out.diagnostics.omega == 1.0);
        CHECK_FALSE(out.diagnostics.guidance_active);
        CHECK_FALSE(out.diagnostics.c_ref.has_value());
        CHECK(out.diagnostics.classifier_invoked);
    }
}

TEST_CASE("gfcg active applies the adaptive combination") {
    const auto world = make_fixture("overlap-2");
    const auto models = models_for(world);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const GuidedDenoiser den(gfcg_config(0.5, 1.25, 32, 1), models, ve);
    const int t = 20;
    const auto lv = ve.level(t);
    const Vector x = vec({0.3, 0.5});
    CadenceMemory mem;
    Rng rng(3);
    const auto out = guided_denoise(den, x, t, 0, mem, rng);
    const Vector x0 = den.estimate_x0(x, lv, 0);
    const double p = models.classifier.posterior(x0)[0];
    REQUIRE(p < 1.0);
    const double w = adaptive_scale(p, 0.5, 1.25, 1.0);
    CHECK(out.diagnostics.guidance_active);
    CHECK(out.diagnostics.c_ref == 1);
    CHECK(out.diagnostics.omega == doctest::Approx(w).epsilon(1e-15));
    const Vector expected = combine(models.main.evaluate(0, x, lv), models.main.evaluate(1, x, lv), w);
    CHECK((out.d_hat - expected).norm() < 1e-14);
}

TEST_CASE("additive gfcg and reductions") {
    const auto world = make_fixture("ring-8");
    const auto models = models_for(world, inflation(1.3));
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    GuidanceConfig add = gfcg_config(0.0, 1.25, 32, 1);
    add.method = Method::gfcg_additive;
    add.base = BaseMethod::cfg;
    add.omega_cfg = 1.0;
    const GuidedDenoiser den(add, models, ve);
    GuidanceConfig zero = gfcg_config(0.0, 1.25, 32, 1);
    const GuidedDenoiser plain(zero, models, ve);
    Rng rng(4);
    for (int t = 32; t >= 1; --t) {
        const Vector x = (ve.sigma(t) + 1.0) * rng.normal_vector(2);
        CadenceMemory m1;
        CadenceMemory m2;
        const Vector d1 = models.main.evaluate(t % 8, x, ve.level(t));
        CHECK(guided_denoise(den, x, t, t % 8, m1, rng).d_hat == d1);
        CHECK(guided_denoise(plain, x, t, t % 8, m2, rng).d_hat == d1);
    }

    // With both terms live the deltas add around D1.
    add.alpha = 0.7;
    add.omega_cfg = 1.6;
    const GuidedDenoiser live(add, models, ve);
    const int t = 15;
    const auto lv = ve.level(t);
    const Vector x = vec({2.0, 1.0});
    CadenceMemory mem;
    const auto out = guided_denoise(live, x, t, 0, mem, rng);
    REQUIRE(out.diagnostics.guidance_active);
    const Vector d1 = models.main.evaluate(0, x, lv);
    const Vector d_null = models.degraded->evaluate(kUnconditional, x, lv);
    const Vector d_ref = models.degraded->evaluate(*out.diagnostics.c_ref, x, lv);
    const Vector expected = d1 + 0.6 * (d1 - d_null) + (out.diagnostics.omega - 1.0) * (d1 - d_ref);
    CHECK((out.d_hat - expected).norm() < 1e-12);
}

TEST_CASE("classifier guidance gradient matches finite differences") {
    const auto world = make_fixture("ring-8");
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const auto vp = make_vp_schedule(1000, 1e-4, 0.02);
    Rng rng(5);
    for (auto param : {Parameterization::edm_d, Parameterization::noise_prediction}) {
        const auto models = models_for(world, std::nullopt, param);
        GuidanceConfig cfg;
        cfg.method = Method::cg;
        cfg.cg_scale = 1.0;
        const GuidedDenoiser den(cfg, models, ve);
        for (int i = 0; i < 50; ++i) {
            const auto lv = i % 2 ? ve.level(8 + i % 16) : vp.level(50 + 10 * i);
            const int c = i % 8;
            const Vector x = lv.scale * 3.0 * rng.normal_vector(2) + lv.noise * rng.normal_vector(2);
            const Vector term = den.classifier_gradient_term(c, x, lv);
            const double factor = param == Parameterization::noise_prediction
                                      ? -lv.noise
                                      : lv.noise * lv.noise / lv.scale;
            const Vector analytic = term / factor;
            const Vector fd = verify::finite_difference_gradient(
                [&](const Vector& y) {
                    return std::log(models.classifier.posterior(models.main.posterior_mean(c, y, lv))[c]);
                },
                x, 1e-5);
            CHECK((analytic - fd).norm() <= 1e-5 * fd.norm() + 1e-7);
        }
    }
}

TEST_CASE("cadence") {
    CHECK(verify::enumerate_cadence(17, 4, 32) == std::vector<int>{17, 13, 9, 5, 1});
    CHECK(verify::enumerate_cadence(0, 4, 32).empty());
    CHECK(verify::enumerate_cadence(5, 1, 32) == std::vector<int>{5, 4, 3, 2, 1});

    const auto world = make_fixture("ring-8");
    const auto models = models_for(world);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    for (auto [t_s, s_cp] : {std::pair{17, 4}, std::pair{32, 1}, std::pair{20, 7}, std::pair{0, 3}}) {
        GuidanceConfig cfg = gfcg_config(0.5, 1.25, t_s, s_cp);
        cfg.stochastic_ref = true;
        const GuidedDenoiser den(cfg, models, ve);
        CadenceMemory mem;
        Rng rng(6);
        Vector x = ve.sigma(32) * rng.normal_vector(2);
        std::vector<int> invoked;
        for (int t = 32; t >= 1; --t) {
            const auto out = guided_denoise(den, x, t, 3, mem, rng);
            if (out.diagnostics.classifier_invoked) invoked.push_back(t);
            if (out.diagnostics.guidance_active) CHECK(t <= t_s);
            CHECK((out.diagnostics.omega == 1.0) == !out.diagnostics.guidance_active);
            if (out.diagnostics.c_ref) CHECK(*out.diagnostics.c_ref != 3);
            x = x * 0.9;
        }
        CHECK(invoked == verify::enumerate_cadence(t_s, s_cp, 32));
        CHECK(mem.classifier_calls == static_cast<int>(invoked.size()));
    }
}

TEST_CASE("configuration errors surface at construction") {
    const auto world = make_fixture("overlap-2");
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const auto plain = models_for(world);
    auto field_of = [&](const GuidanceConfig& cfg, const ModelSet& models) {
        try {
            GuidedDenoiser den(cfg, models, ve);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("<none>");
    };
    GuidanceConfig atg;
    atg.method = Method::atg;
    atg.omega_atg = 2.0;
    CHECK(field_of(atg, plain) == "degradation");
    CHECK(field_of(atg, models_for(world, inflation(2.0))) == "<none>");

    GuidanceConfig g = gfcg_config(-1.0, 1.0, 17, 1);
    CHECK(field_of(g, plain) == "alpha");
    g = gfcg_config(0.5, 0.0, 17, 1);
    CHECK(field_of(g, plain) == "beta");
    g = gfcg_config(0.5, 1.0, 40, 1);
    CHECK(field_of(g, plain) == "t_s");
    g = gfcg_config(0.5, 1.0, 17, 0);
    CHECK(field_of(g, plain) == "s_cp");
    g = gfcg_config(0.5, 1.0, 17, 1);
    g.tau = 1.5;
    CHECK(field_of(g, plain) == "tau");
    g.tau = 1.0;
    g.x0_estimate = X0Estimate::multistep;
    g.multistep = {4, 1.0, 7.0};  // sigma_1 = 0.002 < sigma'_min at a refresh step
    CHECK(field_of(g, plain) != "<none>");

    const Component only{1.0, vec({0.0, 0.0}), Matrix::Identity(2, 2)};
    const MixtureWorld single({1.0}, {ClassMixture{{only}}});
    CHECK(field_of(gfcg_config(0.5, 1.0, 17, 1), models_for(single)) != "<none>");
}
