#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "gfcg/classifier.hpp"
#include "gfcg/schedules.hpp"
#include "gfcg/world.hpp"

namespace gfcg {

enum class Method { ng, cfg, atg, cg, gfcg, gfcg_mixed, gfcg_additive };

/// Method that GFCG is mixed with (mixed) or summed with (additive).
enum class BaseMethod { ng, cfg, atg, cg };

enum class X0Estimate { single_step, multistep };

/// Which model supplies D^g(x, t, c_ref). `automatic` picks the degraded model
/// when one is configured, else the main model.
enum class ReferenceModel { automatic, main, degraded };

std::string_view to_string(Method m);
std::string_view to_string(BaseMethod m);
std::optional<Method> parse_method(std::string_view s);
std::optional<BaseMethod> parse_base_method(std::string_view s);

struct MultistepSettings {
    int steps = 4;
    double sigma_min = 0.002;
    double rho = 7.0;

    bool operator==(const MultistepSettings&) const = default;
};

struct GuidanceConfig {
    Method method = Method::ng;
    BaseMethod base = BaseMethod::ng;

    // Adaptive scale omega = 1 + alpha exp(-beta (p_des - tau)) while p_des < tau.
    double alpha = 0.0;
    double beta = 1.0;
    double tau = 1.0;

    double omega_cfg = 1.0;
    double omega_atg = 1.0;
    double cg_scale = 0.0;

    int t_s = 0;   // GFCG acts on steps t <= t_s
    int s_cp = 1;  // classifier refresh cadence

    bool stochastic_ref = false;
    X0Estimate x0_estimate = X0Estimate::single_step;
    MultistepSettings multistep;
    ReferenceModel reference_model = ReferenceModel::automatic;

    bool is_gfcg_family() const;
    /// The method used by mixed GFCG while GFCG is inactive, by additive GFCG
    /// as its partner term, and by the multistep x0 solver.
    BaseMethod fallback() const;
    /// Throws ConfigError naming the first field that violates its constraint.
    void validate(int steps) const;

    bool operator==(const GuidanceConfig&) const = default;
};

/// Per-step observability record.
struct StepDiagnostics {
    int t = 0;
    std::optional<double> p_des;
    double omega = 1.0;
    std::optional<int> c_ref;
    bool guidance_active = false;
    bool classifier_invoked = false;
};

/// Models consulted by the guided denoiser.
struct ModelSet {
    DenoiserModel main;
    std::optional<DenoiserModel> degraded;
    ClassifierModel classifier;

    /// D^g for CFG's null condition: the degraded model when present.
    const DenoiserModel& guidance() const { return degraded ? *degraded : main; }
};

double adaptive_scale(double p_des, double alpha, double beta, double tau);

/// Reference class: the argmax when it is not c_des, else the runner-up.
int select_reference_class(std::span<const double> probs, int c_des);

/// Draws c_ref != c_des with probability p_i / sum_{j != des} p_j.
int sample_reference_class(std::span<const double> probs, int c_des, Rng& rng);

/// omega * d1 - (omega - 1) * d2
Vector combine(const Vector& d1, const Vector& d2, double omega);

/// x0 = (x_t - sqrt(1 - alpha_bar) eps) / sqrt(alpha_bar)
Vector estimate_x0_single(const Vector& x_t, const Vector& eps, double alpha_bar_t);

/// GFCG cadence memory: the last classifier prediction persists between refreshes.
struct CadenceMemory {
    std::optional<double> p_des;
    double omega = 1.0;
    std::optional<int> c_ref;
    int classifier_calls = 0;
};

/// Guidance decision for one solver step; the Heun corrector reuses it.
struct StepDecision {
    int t = 0;
    bool gfcg_active = false;
    double omega = 1.0;
    int c_ref = -1;
    bool classifier_invoked = false;
};

struct X0Result {
    Vector x0;
    int extra_nfe = 0;
};

/// Computes the guided output D-hat for every supported method. Output is in
/// the main model's parameterization.
class GuidedDenoiser {
public:
    /// Validates the configuration against the models and schedule; all
    /// configuration errors surface here rather than mid-chain.
    GuidedDenoiser(GuidanceConfig config, const ModelSet& models, const NoiseSchedule& schedule);

    const GuidanceConfig& config() const { return config_; }
    const ModelSet& models() const { return *models_; }
    const NoiseSchedule& schedule() const { return *schedule_; }
    Parameterization parameterization() const { return models_->main.parameterization(); }

    struct Prepared {
        StepDecision decision;
        int extra_nfe = 0;
    };

    /// Start of step t: refreshes the classifier prediction when the cadence
    /// says so and fixes the guidance decision for this step.
    Prepared prepare(int t, const Vector& x_t, int c_des, CadenceMemory& memory, Rng& rng) const;

    /// D-hat at an arbitrary point for a fixed decision.
    Vector evaluate(const StepDecision& decision, int c_des, const Vector& x,
                    NoiseLevel level) const;

    /// Output of a plain (non-GFCG) method at (x, level).
    Vector base_output(BaseMethod method, int c_des, const Vector& x, NoiseLevel level) const;

    /// Multi-step x0 estimate: T' Heun steps on an inner schedule whose top
    /// noise level is the current one, dispatching D-hat' per `base`.
    X0Result estimate_x0_multistep(const Vector& x_t, NoiseLevel level, int c_des,
                                      BaseMethod base, const MultistepSettings& inner) const;

    /// One-step x0 estimate from the main model's noise prediction.
    Vector estimate_x0(const Vector& x_t, NoiseLevel level, int c_des) const;

    /// Classifier-guidance correction to the main output at (x, level).
    Vector classifier_gradient_term(int c_des, const Vector& x, NoiseLevel level) const;

    StepDiagnostics diagnostics(const StepDecision& decision, const CadenceMemory& memory) const;

private:
    const DenoiserModel& reference_model() const;
    bool refreshes_at(int t) const;

    GuidanceConfig config_;
    const ModelSet* models_;
    const NoiseSchedule* schedule_;
};

struct GuidedOutput {
    Vector d_hat;
    StepDiagnostics diagnostics;
    int nfe_increment = 0;
};

/// Single-evaluation form of one sampler step: prepare + evaluate at x_t.
GuidedOutput guided_denoise(const GuidedDenoiser& denoiser, const Vector& x_t, int t, int c_des,
                            CadenceMemory& memory, Rng& rng);

}  // namespace gfcg
