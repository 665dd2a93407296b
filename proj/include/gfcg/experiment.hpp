#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gfcg/config.hpp"
#include "gfcg/metrics.hpp"
#include "gfcg/samplers.hpp"

namespace gfcg {

/// World, schedule, models and guided denoiser assembled from a spec. Not
/// movable: the denoiser points into the other members.
class Experiment {
public:
    explicit Experiment(const ExperimentSpec& spec);
    Experiment(const Experiment&) = delete;
    Experiment& operator=(const Experiment&) = delete;

    const ExperimentSpec& spec() const { return spec_; }
    const MixtureWorld& world() const { return world_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const ModelSet& models() const { return models_; }
    const GuidedDenoiser& denoiser() const { return *denoiser_; }

private:
    ExperimentSpec spec_;
    MixtureWorld world_;
    NoiseSchedule schedule_;
    ModelSet models_;
    std::unique_ptr<GuidedDenoiser> denoiser_;
};

struct ReportRow {
    std::string method;
    std::optional<double> axis_value;
    MetricsReport report;
    std::uint64_t seed = 0;
};

struct BatchOutcome {
    std::vector<ChainResult> chains;
    ReportRow row;
};

/// Samples and evaluates without touching the filesystem.
BatchOutcome simulate(const ExperimentSpec& spec, unsigned threads = 0);

/// Seed of the fresh real reference sample used by the metrics.
std::uint64_t reference_seed(const ExperimentSpec& spec);

std::string samples_csv(const std::vector<ChainResult>& chains, int dimension);
std::string diagnostics_csv(const std::vector<ChainResult>& chains);
std::string report_csv(const std::vector<ReportRow>& rows);
std::string classes_csv(const MetricsReport& report);

struct RunOptions {
    std::string out_dir;
    unsigned threads = 0;
    bool force = false;
};

/// simulate() plus samples.csv, diagnostics.csv, report.csv, classes.csv,
/// classes.svg and omega.svg in the output directory.
ReportRow run_experiment(const ExperimentSpec& spec, const RunOptions& options);

/// One experiment per axis value; writes report.csv and sweep.svg at the top
/// level and each point's samples and diagnostics under point_<i>/.
std::vector<ReportRow> run_sweep(const ExperimentSpec& spec, const std::string& axis,
                                 const std::vector<double>& values, const RunOptions& options);

struct LoadedSamples {
    std::vector<LabeledSample> samples;
    std::vector<int> nfe;
};

LoadedSamples read_samples_csv(const std::string& path, int dimension);

/// Metrics of an existing samples.csv under the spec's world and classifier.
ReportRow recompute_metrics(const ExperimentSpec& spec, const std::string& samples_path);

}  // namespace gfcg
