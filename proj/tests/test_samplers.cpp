#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gfcg/errors.hpp"
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

ModelSet plain_models(const MixtureWorld& w, Parameterization p = Parameterization::edm_d) {
    return ModelSet{DenoiserModel::main(w, p), std::nullopt, ClassifierModel(w)};
}

bool same_chains(const std::vector<ChainResult>& a, const std::vector<ChainResult>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].final_sample != b[i].final_sample || a[i].nfe_total != b[i].nfe_total ||
            a[i].seed != b[i].seed || a[i].c_des != b[i].c_des)
            return false;
        for (std::size_t k = 0; k < a[i].diagnostics.size(); ++k)
            if (a[i].diagnostics[k].omega != b[i].diagnostics[k].omega ||
                a[i].diagnostics[k].p_des != b[i].diagnostics[k].p_des)
                return false;
    }
    return true;
}

}  // namespace

TEST_CASE("ddim step") {
    CHECK(ddim_step(vec({0.7}), vec({3.0}), 1.0, 0.5)[0] == 0.7);
    CHECK(ddim_step(vec({0.7}), vec({0.0}), 0.99, 0.5)[0] == doctest::Approx(0.7 / std::sqrt(0.99)).epsilon(1e-15));
    CHECK(ddim_step(vec({1.0}), vec({0.2}), 0.99, 0.5)[0] ==
          doctest::Approx(1.002195139041137).epsilon(1e-14));
    CHECK_THROWS_AS(ddim_step(vec({1.0}), vec({0.2}), 0.99, 1.0), std::invalid_argument);
}

TEST_CASE("heun step") {
    const DenoiserFn zero = [](const Vector& x, double) { return Vector::Zero(x.size()).eval(); };
    const auto h = heun_step(vec({4.0}), 2.0, 1.0, zero);
    CHECK(h.x[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(h.evals == 2);
    CHECK(euler_step(vec({4.0}), 2.0, 1.0, zero).x[0] == doctest::Approx(2.0).epsilon(1e-15));

    const DenoiserFn constant = [](const Vector&, double) { return vec({0.5}); };
    // x - D is not constant, so compare against an evaluator returning x itself.
    const DenoiserFn identity = [](const Vector& x, double) { return x; };
    CHECK(heun_step(vec({1.5}), 3.0, 1.0, identity).x == euler_step(vec({1.5}), 3.0, 1.0, identity).x);
    const auto last = heun_step(vec({1.5}), 0.002, 0.0, constant);
    CHECK(last.evals == 1);
    CHECK(last.x[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("nfe accounting") {
    const auto w = make_fixture("overlap-2");
    const auto models = plain_models(w);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    GuidanceConfig cfg;
    cfg.method = Method::gfcg;
    cfg.alpha = 0.5;
    cfg.beta = 1.25;
    cfg.t_s = 17;
    cfg.s_cp = 32;
    {
        const GuidedDenoiser den(cfg, models, ve);
        const auto r = run_chain(den, {}, 0, 3);
        CHECK(r.nfe_total == 63);
        CHECK(r.diagnostics.size() == 32);
        CHECK(expected_nfe(cfg, Solver::heun, 32) == 63);
    }
    cfg.x0_estimate = X0Estimate::multistep;
    for (auto [steps, floor, want] : {std::tuple{1, 0.002, 64}, std::tuple{2, 1.0, 66}, std::tuple{4, 0.002, 70}}) {
        cfg.multistep = {steps, floor, 7.0};
        const GuidedDenoiser den(cfg, models, ve);
        CHECK(run_chain(den, {}, 0, 3).nfe_total == want);
        CHECK(expected_nfe(cfg, Solver::heun, 32) == want);
    }
    cfg.t_s = 18;  // refreshes at 18, 14, 10, 6, 2
    cfg.s_cp = 4;
    cfg.multistep = {3, 0.002, 7.0};
    const GuidedDenoiser every(cfg, models, ve);
    const auto r = run_chain(every, {Solver::euler, false}, 1, 9);
    CHECK(r.nfe_total == 32 + 5 * 5);
    CHECK(expected_nfe(cfg, Solver::euler, 32) == r.nfe_total);
}

TEST_CASE("initial noise and trajectory") {
    const auto w = make_fixture("overlap-2");
    const auto models = plain_models(w);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const GuidedDenoiser den(GuidanceConfig{}, models, ve);
    const auto r = run_chain(den, {Solver::heun, true}, 0, 12);
    REQUIRE(r.trajectory.size() == 33);
    CHECK(r.trajectory.back() == r.final_sample);
    Rng rng(12, Stream::initial_noise);
    CHECK(r.trajectory.front() == (80.0 * rng.normal_vector(2)).eval());
    CHECK(run_chain(den, {}, 0, 12).trajectory.empty());
}

TEST_CASE("vp chains use the ddim update") {
    const auto w = make_fixture("overlap-2");
    const auto models = plain_models(w, Parameterization::noise_prediction);
    const auto vp = make_vp_schedule(100, 1e-4, 0.2);
    const GuidedDenoiser den(GuidanceConfig{}, models, vp);
    CHECK_THROWS_AS(run_chain(den, {Solver::heun, false}, 0, 1), ConfigError);
    const auto r = run_chain(den, {Solver::euler, false}, 0, 1);
    CHECK(r.nfe_total == 100);
    CHECK(r.final_sample.allFinite());
}

TEST_CASE("batch determinism and seeding") {
    const auto w = make_fixture("ring-8");
    const auto models = plain_models(w);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    GuidanceConfig cfg;
    cfg.method = Method::gfcg;
    cfg.alpha = 0.5;
    cfg.beta = 1.25;
    cfg.t_s = 20;
    cfg.s_cp = 2;
    cfg.stochastic_ref = true;
    const GuidedDenoiser den(cfg, models, ve);
    const ClassPolicy policy;
    const auto serial = run_batch(den, {}, policy, 64, 77, 1);
    const auto again = run_batch(den, {}, policy, 64, 77, 1);
    const auto parallel = run_batch(den, {}, policy, 64, 77, 4);
    CHECK(same_chains(serial, again));
    CHECK(same_chains(serial, parallel));
    for (int i = 0; i < 64; ++i) CHECK(serial[static_cast<std::size_t>(i)].c_des == i % 8);

    const auto single = run_batch(den, {}, policy, 1, 77, 1);
    const auto direct = run_chain(den, {}, 0, chain_seed(77, 0));
    CHECK(single.front().final_sample == direct.final_sample);

    ClassPolicy fixed;
    fixed.kind = ClassPolicy::Kind::fixed;
    fixed.fixed_class = 5;
    for (const auto& c : run_batch(den, {}, fixed, 10, 1, 2)) CHECK(c.c_des == 5);
    CHECK(chain_seed(77, 0) != chain_seed(77, 1));
    CHECK(chain_seed(77, 0) != chain_seed(78, 0));
}

TEST_CASE("unguided chains reproduce the class distribution") {
    const auto w = make_fixture("overlap-2");
    const auto models = plain_models(w);
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const GuidedDenoiser den(GuidanceConfig{}, models, ve);
    const auto chains = run_batch(den, {}, ClassPolicy{}, 5000, 2024);
    for (int c = 0; c < 2; ++c) {
        std::vector<Vector> pts;
        for (const auto& r : chains)
            if (r.c_des == c) pts.push_back(r.final_sample);
        Vector mean = Vector::Zero(2);
        for (const auto& p : pts) mean += p;
        mean /= static_cast<double>(pts.size());
        Matrix cov = Matrix::Zero(2, 2);
        for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
        cov /= static_cast<double>(pts.size() - 1);
        const auto& comp = w.classes()[static_cast<std::size_t>(c)].components[0];
        CHECK((mean - comp.mean).cwiseAbs().maxCoeff() < 0.05);
        CHECK((cov - comp.covariance).cwiseAbs().maxCoeff() < 0.1);
    }
}

TEST_CASE("heun converges at second order") {
    const double mean = 0.5;
    const double var = 1.0;
    const Component comp{1.0, vec({mean}), Matrix::Constant(1, 1, var)};
    const MixtureWorld w({0.5, 0.5}, {ClassMixture{{comp}}, ClassMixture{{comp}}});
    const auto models = plain_models(w);
    std::vector<double> log_t;
    std::vector<double> log_err;
    for (int steps : {8, 16, 32, 64}) {
        const auto ve = make_ve_schedule(steps, 0.002, 80.0, 7.0);
        const GuidedDenoiser den(GuidanceConfig{}, models, ve);
        double err = 0.0;
        for (int i = 0; i < 32; ++i) {
            const auto r = run_chain(den, {Solver::heun, true}, 0, 500 + i);
            const double exact = verify::gaussian_flow(mean, var, r.trajectory.front()[0], 80.0, 0.0);
            err += std::abs(r.final_sample[0] - exact);
        }
        log_t.push_back(std::log(steps));
        log_err.push_back(std::log(err / 32));
    }
    double mt = 0.0;
    double me = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        mt += log_t[i] / 4;
        me += log_err[i] / 4;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        sxy += (log_t[i] - mt) * (log_err[i] - me);
        sxx += (log_t[i] - mt) * (log_t[i] - mt);
    }
    CHECK(-sxy / sxx >= 1.7);
}
