#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gfcg/classifier.hpp"
#include "gfcg/guidance.hpp"
#include "gfcg/samplers.hpp"
#include "gfcg/schedules.hpp"
#include "gfcg/world.hpp"

namespace gfcg {

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::variance_exploding;
    int steps = 32;
    VeParams ve;
    VpParams vp;
    Parameterization parameterization = Parameterization::edm_d;

    NoiseSchedule build() const;
    bool operator==(const ScheduleSpec&) const = default;
};

struct ClassifierSpec {
    double temperature = 1.0;
    double label_noise = 0.0;

    bool operator==(const ClassifierSpec&) const = default;
};

struct SweepSpec {
    std::string axis;
    std::vector<double> values;

    bool operator==(const SweepSpec&) const = default;
};

struct ExperimentSpec {
    // Exactly one of the two is set.
    std::optional<std::string> fixture = "overlap-2";
    std::optional<MixtureWorld> inline_world;

    ScheduleSpec schedule;
    Solver solver = Solver::heun;
    GuidanceConfig guidance;
    std::optional<DegradationParams> degradation;
    ClassifierSpec classifier;

    int chains = 1000;
    std::uint64_t base_seed = 0;
    ClassPolicy class_policy;
    bool retain_trajectory = false;
    std::string output_dir = "out";
    std::optional<SweepSpec> sweep;

    MixtureWorld build_world() const;
    /// Referential completeness and range checks; throws ConfigError.
    void validate() const;

    bool operator==(const ExperimentSpec&) const = default;
};

/// Sectioned `key = value` text. Lists are `[a, b, c]`; strings may be bare
/// words or double-quoted; `#` starts a comment. Throws ParseError for
/// malformed text or unknown keys and ConfigError for invalid values.
ExperimentSpec parse_config(std::string_view text);
ExperimentSpec load_config(const std::string& path);

/// Canonical text form; parse_config(emit_config(s)) == s.
std::string emit_config(const ExperimentSpec& spec);

/// Sweepable numeric fields.
const std::vector<std::string>& sweep_axes();
/// Sets a sweepable field on `spec`. Throws ConfigError for unknown axes and
/// for non-integral values of integer axes.
void apply_axis(ExperimentSpec& spec, std::string_view axis, double value);

std::string method_label(const GuidanceConfig& config);

}  // namespace gfcg
