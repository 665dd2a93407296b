#include "gfcg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <random>
#include <stdexcept>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gfcg/guidance.hpp"
#include "gfcg/samplers.hpp"

namespace gfcg::verify {

namespace {

struct ForwardCoefficients {
    double signal_var;  // scale^2
    double noise_var;   // noise^2
};

ForwardCoefficients forward(const NoiseSchedule& schedule, int t) {
    if (schedule.kind() == ScheduleKind::variance_preserving)
        return {schedule.alpha_bar(t), 1.0 - schedule.alpha_bar(t)};
    const double s = schedule.sigma(t);
    return {1.0, s * s};
}

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

double log_density(const MixtureWorld& world, int cls, const Vector& x,
                   const NoiseSchedule& schedule, int t) {
    const auto [sv, nv] = forward(schedule, t);
    const double scale = std::sqrt(sv);
    const auto d = static_cast<double>(x.size());
    double total = -std::numeric_limits<double>::infinity();
    for (const auto& comp : world.mixture(cls).components) {
        Matrix cov = sv * comp.covariance;
        cov.diagonal().array() += nv;
        const Eigen::LLT<Matrix> chol(cov);
        const Matrix lower = chol.matrixL();
        const Vector z = lower.triangularView<Eigen::Lower>().solve(x - scale * comp.mean);
        const double log_det = 2.0 * lower.diagonal().array().log().sum();
        const double lp = std::log(comp.weight) - 0.5 * (z.squaredNorm() + log_det +
                                                         d * std::log(2.0 * std::numbers::pi));
        total = log_add(total, lp);
    }
    return total;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector up = x;
        Vector down = x;
        up[i] += h;
        down[i] -= h;
        g[i] = (f(up) - f(down)) / (2.0 * h);
    }
    return g;
}

Vector finite_difference_score(const MixtureWorld& world, int cls, const Vector& x,
                               const NoiseSchedule& schedule, int t, double h) {
    return finite_difference_gradient(
        [&](const Vector& y) { return log_density(world, cls, y, schedule, t); }, x, h);
}

McEstimate mc_posterior_mean(const MixtureWorld& world, int cls, const Vector& x_t,
                             const NoiseSchedule& schedule, int t, int n, std::uint64_t seed) {
    if (n < 10'000) throw std::invalid_argument("mc_posterior_mean: n must be >= 1e4");
    const auto [sv, nv] = forward(schedule, t);
    const double scale = std::sqrt(sv);
    const auto& comps = world.mixture(cls).components;
    std::vector<Matrix> lowers;
    for (const auto& c : comps) lowers.push_back(Eigen::LLT<Matrix>(c.covariance).matrixL());

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto d = x_t.size();

    std::vector<Vector> draws;
    std::vector<double> log_w;
    draws.reserve(static_cast<std::size_t>(n));
    log_w.reserve(static_cast<std::size_t>(n));
    Vector z(d);
    for (int i = 0; i < n; ++i) {
        double u = unif(engine);
        std::size_t k = 0;
        while (k + 1 < comps.size() && u >= comps[k].weight) u -= comps[k++].weight;
        for (Eigen::Index j = 0; j < d; ++j) z[j] = gauss(engine);
        Vector x0 = comps[k].mean + lowers[k] * z;
        log_w.push_back(-(x_t - scale * x0).squaredNorm() / (2.0 * nv));
        draws.push_back(std::move(x0));
    }
    const double peak = *std::max_element(log_w.begin(), log_w.end());
    double sum_w = 0.0;
    for (double& lw : log_w) {
        lw = std::exp(lw - peak);
        sum_w += lw;
    }
    McEstimate est;
    est.estimate = Vector::Zero(d);
    double sum_w2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = log_w[static_cast<std::size_t>(i)] / sum_w;
        est.estimate += w * draws[static_cast<std::size_t>(i)];
        sum_w2 += w * w;
    }
    Vector var = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
        const double w = log_w[static_cast<std::size_t>(i)] / sum_w;
        var += (w * w) * (draws[static_cast<std::size_t>(i)] - est.estimate).cwiseAbs2();
    }
    est.standard_error = var.cwiseSqrt();
    est.effective_sample_size = 1.0 / sum_w2;
    est.low_ess = est.effective_sample_size < 100.0;
    return est;
}

std::vector<int> enumerate_cadence(int t_s, int s_cp, int steps) {
    std::vector<int> out;
    for (int t = std::min(t_s, steps); t >= 1; --t)
        if ((t_s - t) % s_cp == 0) out.push_back(t);
    return out;
}

double quadrature_precision(const MixtureWorld& world, const ClassifierModel& classifier, int cls,
                            int cells_per_axis, double half_widths) {
    if (world.dimension() != 2) throw std::invalid_argument("quadrature_precision: 2-D worlds only");
    const auto& comps = world.mixture(cls).components;
    Vector lo = Vector::Constant(2, std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    for (const auto& c : comps) {
        const double sd = std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(c.covariance,
                                                                          Eigen::EigenvaluesOnly)
                                        .eigenvalues()
                                        .maxCoeff());
        const Vector margin = Vector::Constant(2, half_widths * sd);
        lo = lo.cwiseMin(c.mean - margin);
        hi = hi.cwiseMax(c.mean + margin);
    }
    const Vector step = (hi - lo) / cells_per_axis;
    const double cell_area = step[0] * step[1];
    std::vector<Eigen::LLT<Matrix>> chols;
    std::vector<double> log_norms;
    for (const auto& c : comps) {
        chols.emplace_back(c.covariance);
        const Matrix l = chols.back().matrixL();
        log_norms.push_back(std::log(c.weight) - std::log(2.0 * std::numbers::pi) -
                            l.diagonal().array().log().sum());
    }
    double hit = 0.0;
    double mass = 0.0;
    Vector x(2);
    for (int i = 0; i < cells_per_axis; ++i) {
        x[0] = lo[0] + (i + 0.5) * step[0];
        for (int j = 0; j < cells_per_axis; ++j) {
            x[1] = lo[1] + (j + 0.5) * step[1];
            double density = 0.0;
            for (std::size_t k = 0; k < comps.size(); ++k) {
                const Matrix l = chols[k].matrixL();
                const Vector z = l.triangularView<Eigen::Lower>().solve(x - comps[k].mean);
                density += std::exp(log_norms[k] - 0.5 * z.squaredNorm());
            }
            const double m = density * cell_area;
            mass += m;
            if (classifier.predict(x) == cls) hit += m;
        }
    }
    return hit / mass;
}

double gaussian_flow(double mean, double var, double x, double sigma_from, double sigma_to) {
    return mean + (x - mean) * std::sqrt((var + sigma_to * sigma_to) / (var + sigma_from * sigma_from));
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::vector<OracleCheck> run_oracle_suite(const SuiteOptions& options) {
    std::vector<OracleCheck> checks;
    const auto ve = make_ve_schedule(32, 0.002, 80.0, 7.0);
    const auto vp = make_vp_schedule(1000, 1e-4, 0.02);

    {
        const bool ends = ve.sigma(32) == 80.0 && ve.sigma(1) == 0.002 && ve.sigma(0) == 0.0;
        double worst = 0.0;
        const double r1 = std::pow(ve.sigma(1), 1.0 / 7.0);
        const double rT = std::pow(ve.sigma(32), 1.0 / 7.0);
        for (int t = 2; t < 32; ++t) {
            const double line = r1 + (rT - r1) * (t - 1) / 31.0;
            worst = std::max(worst, std::abs(std::pow(ve.sigma(t), 1.0 / 7.0) - line) / line);
        }
        checks.push_back({"schedule endpoints and rho-affinity", ends && worst < 1e-12,
                          "max affine deviation " + fmt_double(worst)});
    }

    {
        const double w = adaptive_scale(0.5, 2.5, 1.0, 1.0);
        const bool ok = std::abs(w - (1.0 + 2.5 * std::exp(0.5))) < 1e-12 &&
                        adaptive_scale(1.0, 2.5, 1.0, 1.0) == 1.0;
        checks.push_back({"adaptive scale closed form", ok, "omega(0.5) = " + fmt_double(w)});
    }

    Rng rng(options.seed);
    for (const char* name : {"overlap-2", "ring-8"}) {
        const auto world = make_fixture(name);
        const auto model = DenoiserModel::main(world, Parameterization::edm_d);
        double worst = 0.0;
        int failures = 0;
        for (int i = 0; i < options.score_probes; ++i) {
            const bool use_vp = i % 4 == 3;
            const auto& sched = use_vp ? vp : ve;
            const int t = 1 + static_cast<int>(rng.uniform() * sched.steps()) % sched.steps();
            const int cls = static_cast<int>(rng.uniform() * world.class_count()) % world.class_count();
            const auto x0 = sample_data(world, cls, 1, rng).front();
            const auto lv = sched.level(t);
            const Vector x = lv.scale * x0 + lv.noise * rng.normal_vector(world.dimension());
            const Vector analytic = model.score(cls, x, lv);
            const Vector fd = finite_difference_score(world, cls, x, sched, t, 1e-5);
            const double err = (analytic - fd).norm();
            const double tol = 1e-5 * fd.norm() + 1e-8;
            worst = std::max(worst, err / (fd.norm() + 1e-3));
            if (!(err <= tol)) ++failures;
        }
        checks.push_back({std::string("score vs finite differences (") + name + ")", failures == 0,
                          std::to_string(failures) + " of " + std::to_string(options.score_probes) +
                              " probes outside tolerance; worst rel " + fmt_double(worst)});
    }

    for (const char* name : {"overlap-2", "ring-8"}) {
        const auto world = make_fixture(name);
        const auto model = DenoiserModel::main(world, Parameterization::x0_prediction);
        int failures = 0;
        double worst_z = 0.0;
        bool low_ess = false;
        const int probes = options.posterior_probes / 2;
        for (int i = 0; i < probes; ++i) {
            // Moderate noise levels keep the importance weights well spread.
            const int t = 10 + static_cast<int>(rng.uniform() * 14.0) % 14;
            const int cls = static_cast<int>(rng.uniform() * world.class_count()) % world.class_count();
            const auto x0 = sample_data(world, cls, 1, rng).front();
            const auto lv = ve.level(t);
            const Vector x = x0 + lv.noise * rng.normal_vector(world.dimension());
            const Vector exact = model.posterior_mean(cls, x, lv);
            const auto mc = mc_posterior_mean(world, cls, x, ve, t, options.posterior_draws,
                                              options.seed + 7919u * static_cast<unsigned>(i));
            low_ess = low_ess || mc.low_ess;
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                const double z = std::abs(exact[j] - mc.estimate[j]) / mc.standard_error[j];
                worst_z = std::max(worst_z, z);
                if (!(z <= 3.0)) ++failures;
            }
        }
        checks.push_back({std::string("posterior mean vs Monte Carlo (") + name + ")",
                          failures == 0 && !low_ess,
                          std::to_string(failures) + " coordinates beyond 3 SE; worst " +
                              fmt_double(worst_z) + " SE" + (low_ess ? "; low ESS" : "")});
    }

    {
        const auto world = make_fixture("overlap-2");
        const ModelSet models{DenoiserModel::main(world, Parameterization::edm_d), std::nullopt,
                              ClassifierModel(world)};
        GuidanceConfig cfg;
        cfg.method = Method::gfcg;
        cfg.alpha = 0.5;
        cfg.beta = 1.25;
        cfg.t_s = 17;
        cfg.s_cp = 4;
        const GuidedDenoiser denoiser(cfg, models, ve);
        const auto chain = run_chain(denoiser, {}, 0, 42);
        std::vector<int> invoked;
        for (const auto& d : chain.diagnostics)
            if (d.classifier_invoked) invoked.push_back(d.t);
        const bool ok = invoked == enumerate_cadence(17, 4, 32);
        checks.push_back({"classifier cadence enumeration", ok,
                          std::to_string(invoked.size()) + " refreshes"});

        std::ostringstream detail;
        bool nfe_ok = chain.nfe_total == 63;
        detail << "base " << chain.nfe_total;
        cfg.s_cp = 32;
        cfg.x0_estimate = X0Estimate::multistep;
        for (auto [steps, floor, want] : {std::tuple{1, 0.002, 64}, std::tuple{2, 1.0, 66},
                                          std::tuple{4, 0.002, 70}}) {
            cfg.multistep = {steps, floor, 7.0};
            const GuidedDenoiser ms(cfg, models, ve);
            const int got = run_chain(ms, {}, 0, 42).nfe_total;
            nfe_ok = nfe_ok && got == want;
            detail << ", T'=" << steps << " " << got;
        }
        checks.push_back({"NFE accounting", nfe_ok, detail.str()});
    }
    return checks;
}

}  // namespace gfcg::verify
