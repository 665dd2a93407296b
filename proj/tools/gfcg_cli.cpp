#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gfcg/config.hpp"
#include "gfcg/errors.hpp"
#include "gfcg/experiment.hpp"
#include "gfcg/verify.hpp"

namespace {

enum Exit { kOk = 0, kInvalid = 1, kOracle = 2, kIo = 3 };

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> chains;
    bool force = false;
    unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config file")->required();
    cmd->add_option("--out", c.out, "output directory (overrides [output] dir)");
    cmd->add_option("--seed", c.seed, "base seed (overrides [experiment] base_seed)");
    cmd->add_option("--chains", c.chains, "chain count (overrides [experiment] chains)");
    cmd->add_flag("--force", c.force, "overwrite an existing run directory");
    cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores");
}

gfcg::ExperimentSpec load(const Common& c) {
    gfcg::ExperimentSpec spec = gfcg::load_config(c.config);
    if (c.seed) spec.base_seed = *c.seed;
    if (c.chains) spec.chains = *c.chains;
    if (!c.out.empty()) spec.output_dir = c.out;
    spec.validate();
    return spec;
}

void print_rows(const std::vector<gfcg::ReportRow>& rows) { std::cout << gfcg::report_csv(rows); }

int run_verify(const gfcg::verify::SuiteOptions& options) {
    const auto checks = gfcg::verify::run_oracle_suite(options);
    int failed = 0;
    for (const auto& c : checks) {
        std::printf("%-4s  %-44s  %s\n", c.passed ? "ok" : "FAIL", c.name.c_str(), c.detail.c_str());
        if (!c.passed) ++failed;
    }
    std::printf("verify: checks=%zu passed=%zu failed=%d\n", checks.size(),
                checks.size() - static_cast<std::size_t>(failed), failed);
    return failed == 0 ? kOk : kOracle;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gradient-free classifier guidance on analytic Gaussian-mixture worlds"};
    app.require_subcommand(1);

    Common sample_opts;
    auto* sample = app.add_subcommand("sample", "run one experiment");
    add_common(sample, sample_opts);

    Common sweep_opts;
    std::string axis;
    std::vector<double> values;
    auto* sweep = app.add_subcommand("sweep", "run one ablation axis");
    add_common(sweep, sweep_opts);
    sweep->add_option("--axis", axis, "field to sweep (overrides [sweep] axis)");
    sweep->add_option("--values", values, "comma-separated values (overrides [sweep] values)")
        ->delimiter(',');

    gfcg::verify::SuiteOptions suite;
    auto* verify = app.add_subcommand("verify", "run the oracle agreement suite");
    verify->add_option("--seed", suite.seed, "probe seed");
    verify->add_option("--draws", suite.posterior_draws, "Monte Carlo draws per posterior probe");

    Common metrics_opts;
    std::string samples_path;
    auto* metrics = app.add_subcommand("metrics", "recompute metrics from a samples.csv");
    metrics->add_option("--config", metrics_opts.config, "experiment config file")->required();
    metrics->add_option("--samples", samples_path, "samples.csv path");
    metrics->add_option("--out", metrics_opts.out, "run directory holding samples.csv");
    metrics->add_option("--seed", metrics_opts.seed, "base seed of the reference sample");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*sample) {
            const auto spec = load(sample_opts);
            print_rows({gfcg::run_experiment(spec, {spec.output_dir, sample_opts.threads,
                                                    sample_opts.force})});
        } else if (*sweep) {
            const auto spec = load(sweep_opts);
            if (axis.empty() && spec.sweep) axis = spec.sweep->axis;
            if (values.empty() && spec.sweep) values = spec.sweep->values;
            if (axis.empty()) throw gfcg::ConfigError("axis", "give --axis or a [sweep] section");
            print_rows(gfcg::run_sweep(spec, axis, values,
                                       {spec.output_dir, sweep_opts.threads, sweep_opts.force}));
        } else if (*verify) {
            return run_verify(suite);
        } else if (*metrics) {
            auto spec = gfcg::load_config(metrics_opts.config);
            if (metrics_opts.seed) spec.base_seed = *metrics_opts.seed;
            if (samples_path.empty())
                samples_path = (metrics_opts.out.empty() ? spec.output_dir : metrics_opts.out) +
                               "/samples.csv";
            print_rows({gfcg::recompute_metrics(spec, samples_path)});
        }
    } catch (const gfcg::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kInvalid;
    } catch (const gfcg::ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kInvalid;
    } catch (const gfcg::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kInvalid;
    }
    return kOk;
}
