#pragma once

#include <cstdint>
#include <vector>

#include "gfcg/guidance.hpp"
#include "gfcg/solvers.hpp"

namespace gfcg {

enum class Solver { euler, heun };

struct ChainOptions {
    Solver solver = Solver::heun;
    bool retain_trajectory = false;
};

/// One sampling trajectory. NFE counts solver evaluation points (one per
/// distinct (x, sigma) at which D-hat is formed), not individual model
/// forwards; 32 Heun steps therefore cost 63.
struct ChainResult {
    Vector final_sample;
    std::vector<Vector> trajectory;  // x_T .. x_0 when retained
    std::vector<StepDiagnostics> diagnostics;  // t = T .. 1
    int nfe_total = 0;
    std::uint64_t seed = 0;
    int c_des = 0;
};

/// x_T ~ N(0, sigma_T^2 I) from `seed`, then t = T..1: guidance decision,
/// solver step. VE schedules are integrated as the probability-flow ODE in
/// sigma (Heun or Euler); VP schedules use the DDIM update.
ChainResult run_chain(const GuidedDenoiser& denoiser, const ChainOptions& options, int c_des,
                      std::uint64_t seed);

/// Closed-form NFE for a chain: 2T - 1 (Heun) or T (Euler/DDIM), plus
/// 2T' - 1 per multistep x0 refresh.
int expected_nfe(const GuidanceConfig& config, Solver solver, int steps);

struct ClassPolicy {
    enum class Kind { fixed, round_robin } kind = Kind::round_robin;
    int fixed_class = 0;

    int class_for(int chain, int class_count) const {
        return kind == Kind::fixed ? fixed_class : chain % class_count;
    }
    bool operator==(const ClassPolicy&) const = default;
};

/// Seed of chain `index`, derived by counter from the batch seed.
std::uint64_t chain_seed(std::uint64_t base_seed, int index);

/// Runs `count` independent chains. Output is independent of `threads`
/// (0 = hardware concurrency) and of execution order.
std::vector<ChainResult> run_batch(const GuidedDenoiser& denoiser, const ChainOptions& options,
                                   const ClassPolicy& policy, int count, std::uint64_t base_seed,
                                   unsigned threads = 0);

}  // namespace gfcg
