#include "gfcg/guidance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gfcg/errors.hpp"
#include "gfcg/solvers.hpp"

namespace gfcg {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::ng: return "ng";
        case Method::cfg: return "cfg";
        case Method::atg: return "atg";
        case Method::cg: return "cg";
        case Method::gfcg: return "gfcg";
        case Method::gfcg_mixed: return "gfcg_mixed";
        case Method::gfcg_additive: return "gfcg_additive";
    }
    return "?";
}

std::string_view to_string(BaseMethod m) {
    switch (m) {
        case BaseMethod::ng: return "ng";
        case BaseMethod::cfg: return "cfg";
        case BaseMethod::atg: return "atg";
        case BaseMethod::cg: return "cg";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view s) {
    for (Method m : {Method::ng, Method::cfg, Method::atg, Method::cg, Method::gfcg,
                     Method::gfcg_mixed, Method::gfcg_additive})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::optional<BaseMethod> parse_base_method(std::string_view s) {
    for (BaseMethod m : {BaseMethod::ng, BaseMethod::cfg, BaseMethod::atg, BaseMethod::cg})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

bool GuidanceConfig::is_gfcg_family() const {
    return method == Method::gfcg || method == Method::gfcg_mixed ||
           method == Method::gfcg_additive;
}

BaseMethod GuidanceConfig::fallback() const {
    switch (method) {
        case Method::cfg: return BaseMethod::cfg;
        case Method::atg: return BaseMethod::atg;
        case Method::cg: return BaseMethod::cg;
        case Method::gfcg_mixed:
        case Method::gfcg_additive: return base;
        default: return BaseMethod::ng;
    }
}

void GuidanceConfig::validate(int steps) const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(alpha >= 0.0) || !finite(alpha)) throw ConfigError("alpha", "must be >= 0");
    if (!(beta > 0.0) || !finite(beta)) throw ConfigError("beta", "must be > 0");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau", "must lie in [0, 1]");
    if (!(omega_cfg >= 1.0) || !finite(omega_cfg)) throw ConfigError("omega_cfg", "must be >= 1");
    if (!(omega_atg >= 1.0) || !finite(omega_atg)) throw ConfigError("omega_atg", "must be >= 1");
    if (!(cg_scale >= 0.0) || !finite(cg_scale)) throw ConfigError("cg_scale", "must be >= 0");
    if (t_s < 0 || t_s > steps) throw ConfigError("t_s", "must lie in [0, T]");
    if (s_cp < 1) throw ConfigError("s_cp", "must be >= 1");
    if (multistep.steps < 1) throw ConfigError("multistep_steps", "must be >= 1");
    if (!(multistep.sigma_min > 0.0) || !finite(multistep.sigma_min))
        throw ConfigError("multistep_sigma_min", "must be positive");
    if (!(multistep.rho > 0.0) || !finite(multistep.rho))
        throw ConfigError("multistep_rho", "must be positive");
}

double adaptive_scale(double p_des, double alpha, double beta, double tau) {
    if (p_des < tau) return 1.0 + alpha * std::exp(-beta * (p_des - tau));
    return 1.0;
}

int select_reference_class(std::span<const double> probs, int c_des) {
    const auto [first, second] = top_two(probs);
    return first == c_des ? second : first;
}

int sample_reference_class(std::span<const double> probs, int c_des, Rng& rng) {
    if (probs.size() < 2) throw std::invalid_argument("sample_reference_class: need two classes");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (static_cast<int>(i) != c_des) total += probs[i];
    if (!(total > 0.0))
        throw std::domain_error("sample_reference_class: no probability mass outside c_des");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (static_cast<int>(i) == c_des || probs[i] <= 0.0) continue;
        last = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) return last;
    }
    return last;  // u rounded up to total
}

Vector combine(const Vector& d1, const Vector& d2, double omega) {
    if (d1.size() != d2.size()) throw std::invalid_argument("combine: dimension mismatch");
    return omega * d1 - (omega - 1.0) * d2;
}

Vector estimate_x0_single(const Vector& x_t, const Vector& eps, double alpha_bar_t) {
    if (!(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0))
        throw std::invalid_argument("estimate_x0_single: alpha_bar_t must lie in (0, 1]");
    return (x_t - std::sqrt(1.0 - alpha_bar_t) * eps) / std::sqrt(alpha_bar_t);
}

GuidedDenoiser::GuidedDenoiser(GuidanceConfig config, const ModelSet& models,
                               const NoiseSchedule& schedule)
    : config_(std::move(config)), models_(&models), schedule_(&schedule) {
    const int steps = schedule.steps();
    config_.validate(steps);

    const auto param = models.main.parameterization();
    if (models.degraded && models.degraded->parameterization() != param)
        throw ConfigError("degradation", "guidance model parameterization differs from main");
    if (models.degraded && models.degraded->world().class_count() != models.main.world().class_count())
        throw ConfigError("degradation", "guidance model class count differs from main");
    if (models.classifier.class_count() != models.main.world().class_count())
        throw ConfigError("classifier", "class count differs from world");

    const bool needs_atg = config_.method == Method::atg ||
                           (config_.method != Method::gfcg && config_.is_gfcg_family() &&
                            config_.base == BaseMethod::atg);
    if (needs_atg && !models.degraded)
        throw ConfigError("degradation", "method requires a degraded guidance model");
    if (config_.reference_model == ReferenceModel::degraded && config_.is_gfcg_family() &&
        !models.degraded)
        throw ConfigError("reference_model", "degraded reference requested but not configured");
    if (config_.is_gfcg_family() && models.main.world().class_count() < 2)
        throw ConfigError("method", "GFCG requires at least two classes");

    // Inner multistep schedules start at the current noise level; every
    // refresh step must sit above the inner floor.
    if (config_.is_gfcg_family() && config_.x0_estimate == X0Estimate::multistep &&
        config_.multistep.steps >= 2) {
        for (int t = config_.t_s; t >= 1; --t) {
            if (!refreshes_at(t)) continue;
            if (!(schedule.level(t).ve_sigma() > config_.multistep.sigma_min))
                throw ConfigError("multistep_sigma_min",
                                  "must be below the noise level of refresh step t=" +
                                      std::to_string(t));
        }
    }
}

bool GuidedDenoiser::refreshes_at(int t) const {
    return t >= 1 && t <= config_.t_s && (config_.t_s - t) % config_.s_cp == 0;
}

const DenoiserModel& GuidedDenoiser::reference_model() const {
    switch (config_.reference_model) {
        case ReferenceModel::main: return models_->main;
        case ReferenceModel::degraded: return *models_->degraded;
        case ReferenceModel::automatic: break;
    }
    return models_->guidance();
}

Vector GuidedDenoiser::classifier_gradient_term(int c_des, const Vector& x,
                                                NoiseLevel level) const {
    const auto& main = models_->main;
    const double n2 = level.noise * level.noise;
    const Vector x0 = main.posterior_mean(c_des, x, level);
    // d x0 / d x_t = (I + noise^2 H) / scale, symmetric.
    Matrix jac = n2 * main.score_jacobian(c_des, x, level);
    jac.diagonal().array() += 1.0;
    jac /= level.scale;
    const Vector grad =
        jac.transpose() * models_->classifier.log_posterior_gradient(c_des, x0) * config_.cg_scale;
    // Applied to the score: s' = s + cg_scale * grad.
    if (parameterization() == Parameterization::noise_prediction) return -level.noise * grad;
    return (n2 / level.scale) * grad;
}

Vector GuidedDenoiser::base_output(BaseMethod method, int c_des, const Vector& x,
                                   NoiseLevel level) const {
    Vector d1 = models_->main.evaluate(c_des, x, level);
    switch (method) {
        case BaseMethod::ng: return d1;
        case BaseMethod::cfg:
            return combine(d1, models_->guidance().evaluate(kUnconditional, x, level),
                           config_.omega_cfg);
        case BaseMethod::atg:
            return combine(d1, models_->degraded->evaluate(c_des, x, level), config_.omega_atg);
        case BaseMethod::cg: return d1 + classifier_gradient_term(c_des, x, level);
    }
    return d1;
}

Vector GuidedDenoiser::estimate_x0(const Vector& x_t, NoiseLevel level, int c_des) const {
    const Vector eps = convert_output(models_->main.evaluate(c_des, x_t, level), parameterization(),
                                      Parameterization::noise_prediction, x_t, level);
    return estimate_x0_single(x_t, eps, level.scale * level.scale);
}

X0Result GuidedDenoiser::estimate_x0_multistep(const Vector& x_t, NoiseLevel level, int c_des,
                                               BaseMethod base,
                                               const MultistepSettings& inner) const {
    if (!(level.noise > 0.0)) throw std::invalid_argument("estimate_x0_multistep: t must be >= 1");
    std::vector<double> sigmas;
    try {
        sigmas = karras_sigmas_descending(inner.steps, inner.sigma_min, level.ve_sigma(), inner.rho);
    } catch (const ConfigError& e) {
        throw ConfigError("multistep_" + e.field(), e.what());
    }
    const auto param = parameterization();
    const DenoiserFn inner_denoiser = [&](const Vector& y, double sigma) {
        const NoiseLevel lv{1.0, sigma};
        return convert_output(base_output(base, c_des, y, lv), param, Parameterization::edm_d, y, lv);
    };
    // Inner solve runs on x_t / scale, the equivalent VE state.
    X0Result out{x_t / level.scale, 0};
    for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
        auto step = heun_step(out.x0, sigmas[i], sigmas[i + 1], inner_denoiser);
        out.x0 = std::move(step.x);
        out.extra_nfe += step.evals;
    }
    return out;
}

GuidedDenoiser::Prepared GuidedDenoiser::prepare(int t, const Vector& x_t, int c_des,
                                                 CadenceMemory& memory, Rng& rng) const {
    Prepared out;
    out.decision.t = t;
    if (!config_.is_gfcg_family() || t > config_.t_s) return out;

    if (refreshes_at(t)) {
        const NoiseLevel level = schedule_->level(t);
        Vector x0;
        if (config_.x0_estimate == X0Estimate::multistep) {
            auto est = estimate_x0_multistep(x_t, level, c_des, config_.fallback(), config_.multistep);
            x0 = std::move(est.x0);
            out.extra_nfe = est.extra_nfe;
        } else {
            x0 = estimate_x0(x_t, level, c_des);
        }
        const Vector probs = models_->classifier.posterior(x0);
        const std::span<const double> view(probs.data(), static_cast<std::size_t>(probs.size()));
        const double p_des = probs[c_des];
        memory.p_des = p_des;
        memory.omega = adaptive_scale(p_des, config_.alpha, config_.beta, config_.tau);
        memory.c_ref.reset();
        if (p_des < config_.tau && memory.omega > 1.0) {
            memory.c_ref = config_.stochastic_ref ? sample_reference_class(view, c_des, rng)
                                                  : select_reference_class(view, c_des);
        }
        ++memory.classifier_calls;
        out.decision.classifier_invoked = true;
    }

    if (memory.p_des && *memory.p_des < config_.tau && memory.omega > 1.0 && memory.c_ref) {
        out.decision.gfcg_active = true;
        out.decision.omega = memory.omega;
        out.decision.c_ref = *memory.c_ref;
    }
    return out;
}

Vector GuidedDenoiser::evaluate(const StepDecision& decision, int c_des, const Vector& x,
                                NoiseLevel level) const {
    switch (config_.method) {
        case Method::ng:
        case Method::cfg:
        case Method::atg:
        case Method::cg: return base_output(config_.fallback(), c_des, x, level);
        case Method::gfcg:
        case Method::gfcg_mixed: {
            if (!decision.gfcg_active) return base_output(config_.fallback(), c_des, x, level);
            const Vector d1 = models_->main.evaluate(c_des, x, level);
            return combine(d1, reference_model().evaluate(decision.c_ref, x, level), decision.omega);
        }
        case Method::gfcg_additive: {
            const Vector d1 = models_->main.evaluate(c_des, x, level);
            Vector out = d1;
            switch (config_.base) {
                case BaseMethod::ng: break;
                case BaseMethod::cfg:
                    if (config_.omega_cfg != 1.0)
                        out += (config_.omega_cfg - 1.0) *
                               (d1 - models_->guidance().evaluate(kUnconditional, x, level));
                    break;
                case BaseMethod::atg:
                    if (config_.omega_atg != 1.0)
                        out += (config_.omega_atg - 1.0) *
                               (d1 - models_->degraded->evaluate(c_des, x, level));
                    break;
                case BaseMethod::cg:
                    if (config_.cg_scale != 0.0) out += classifier_gradient_term(c_des, x, level);
                    break;
            }
            if (decision.gfcg_active)
                out += (decision.omega - 1.0) *
                       (d1 - reference_model().evaluate(decision.c_ref, x, level));
            return out;
        }
    }
    throw std::logic_error("unhandled guidance method");
}

StepDiagnostics GuidedDenoiser::diagnostics(const StepDecision& decision,
                                            const CadenceMemory& memory) const {
    StepDiagnostics d;
    d.t = decision.t;
    d.classifier_invoked = decision.classifier_invoked;
    switch (config_.method) {
        case Method::ng: break;
        case Method::cfg:
            d.guidance_active = config_.omega_cfg != 1.0;
            d.omega = config_.omega_cfg;
            break;
        case Method::atg:
            d.guidance_active = config_.omega_atg != 1.0;
            d.omega = config_.omega_atg;
            break;
        case Method::cg: d.guidance_active = config_.cg_scale != 0.0; break;
        default:
            d.p_des = memory.p_des;
            if (decision.gfcg_active) {
                d.guidance_active = true;
                d.omega = decision.omega;
                d.c_ref = decision.c_ref;
            }
            break;
    }
    return d;
}

GuidedOutput guided_denoise(const GuidedDenoiser& denoiser, const Vector& x_t, int t, int c_des,
                            CadenceMemory& memory, Rng& rng) {
    if (t < 1 || t > denoiser.schedule().steps())
        throw std::invalid_argument("guided_denoise: t must lie in [1, T]");
    auto prepared = denoiser.prepare(t, x_t, c_des, memory, rng);
    GuidedOutput out;
    out.d_hat = denoiser.evaluate(prepared.decision, c_des, x_t, denoiser.schedule().level(t));
    out.diagnostics = denoiser.diagnostics(prepared.decision, memory);
    out.nfe_increment = 1 + prepared.extra_nfe;
    return out;
}

}  // namespace gfcg
