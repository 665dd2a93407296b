#include "gfcg/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "gfcg/errors.hpp"

namespace gfcg {

ChainResult run_chain(const GuidedDenoiser& denoiser, const ChainOptions& options, int c_des,
                      std::uint64_t seed) {
    const NoiseSchedule& schedule = denoiser.schedule();
    const auto& world = denoiser.models().main.world();
    const bool vp = schedule.kind() == ScheduleKind::variance_preserving;
    if (vp && options.solver == Solver::heun)
        throw ConfigError("solver", "heun requires a variance-exploding schedule");
    if (c_des < 0 || c_des >= world.class_count())
        throw std::invalid_argument("run_chain: desired class out of range");

    const auto param = denoiser.parameterization();
    const int steps = schedule.steps();

    ChainResult result;
    result.seed = seed;
    result.c_des = c_des;
    result.diagnostics.reserve(static_cast<std::size_t>(steps));

    Rng init_rng(seed, Stream::initial_noise);
    Rng ref_rng(seed, Stream::reference_class);
    Vector x = schedule.terminal_std() * init_rng.normal_vector(world.dimension());
    if (options.retain_trajectory) result.trajectory.push_back(x);

    CadenceMemory memory;
    for (int t = steps; t >= 1; --t) {
        const auto prepared = denoiser.prepare(t, x, c_des, memory, ref_rng);
        result.nfe_total += prepared.extra_nfe;
        result.diagnostics.push_back(denoiser.diagnostics(prepared.decision, memory));

        if (vp) {
            const NoiseLevel level = schedule.level(t);
            const Vector eps = convert_output(denoiser.evaluate(prepared.decision, c_des, x, level),
                                              param, Parameterization::noise_prediction, x, level);
            x = ddim_step(x, eps, schedule.alpha(t), schedule.alpha_bar(t));
            result.nfe_total += 1;
        } else {
            const DenoiserFn d_hat = [&](const Vector& y, double sigma) {
                const NoiseLevel level{1.0, sigma};
                return convert_output(denoiser.evaluate(prepared.decision, c_des, y, level), param,
                                      Parameterization::edm_d, y, level);
            };
            auto step = options.solver == Solver::heun
                            ? heun_step(x, schedule.sigma(t), schedule.sigma(t - 1), d_hat)
                            : euler_step(x, schedule.sigma(t), schedule.sigma(t - 1), d_hat);
            x = std::move(step.x);
            result.nfe_total += step.evals;
        }
        if (options.retain_trajectory) result.trajectory.push_back(x);
    }
    result.final_sample = std::move(x);
    return result;
}

int expected_nfe(const GuidanceConfig& config, Solver solver, int steps) {
    int nfe = solver == Solver::heun ? 2 * steps - 1 : steps;
    if (config.is_gfcg_family() && config.x0_estimate == X0Estimate::multistep) {
        int refreshes = 0;
        for (int t = config.t_s; t >= 1; --t)
            if ((config.t_s - t) % config.s_cp == 0) ++refreshes;
        nfe += refreshes * (2 * config.multistep.steps - 1);
    }
    return nfe;
}

std::uint64_t chain_seed(std::uint64_t base_seed, int index) {
    return derive_stream(base_seed, 0x1000000ULL + static_cast<std::uint64_t>(index));
}

std::vector<ChainResult> run_batch(const GuidedDenoiser& denoiser, const ChainOptions& options,
                                   const ClassPolicy& policy, int count, std::uint64_t base_seed,
                                   unsigned threads) {
    if (count < 1) throw ConfigError("chains", "must be >= 1");
    const int classes = denoiser.models().main.world().class_count();
    if (policy.kind == ClassPolicy::Kind::fixed &&
        (policy.fixed_class < 0 || policy.fixed_class >= classes))
        throw ConfigError("fixed_class", "out of range");

    std::vector<ChainResult> results(static_cast<std::size_t>(count));
    auto run_one = [&](int i) {
        results[static_cast<std::size_t>(i)] =
            run_chain(denoiser, options, policy.class_for(i, classes), chain_seed(base_seed, i));
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) run_one(i);
        return results;
    }

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    run_one(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(count);
                }
            }
        });
    }
    workers.clear();
    if (failure) std::rethrow_exception(failure);
    return results;
}

}  // namespace gfcg
