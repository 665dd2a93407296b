#include "gfcg/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gfcg/errors.hpp"
#include "gfcg/svg.hpp"

namespace gfcg {

namespace fs = std::filesystem;

namespace {

ModelSet build_models(const ExperimentSpec& spec, const MixtureWorld& world) {
    const auto param = spec.schedule.parameterization;
    std::optional<DenoiserModel> degraded;
    if (spec.degradation) degraded = DenoiserModel::guidance(world, param, spec.degradation);
    return ModelSet{DenoiserModel::main(world, param), std::move(degraded),
                    ClassifierModel(world, spec.classifier.temperature, spec.classifier.label_noise)};
}

ExperimentSpec validated(const ExperimentSpec& spec) {
    spec.validate();
    return spec;
}

std::string g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void prepare_dir(const fs::path& dir, bool force) {
    std::error_code ec;
    if (fs::exists(dir / "report.csv", ec) && !force)
        throw IoError("'" + (dir / "report.csv").string() +
                      "' already exists; pass --force to overwrite");
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

svg::Panel omega_panel(const std::vector<ChainResult>& chains) {
    std::map<int, std::pair<double, int>> omega;
    std::map<int, std::pair<double, int>> p_des;
    for (const auto& chain : chains) {
        for (const auto& d : chain.diagnostics) {
            auto& o = omega[d.t];
            o.first += d.omega;
            ++o.second;
            if (d.p_des) {
                auto& p = p_des[d.t];
                p.first += *d.p_des;
                ++p.second;
            }
        }
    }
    svg::Series so{"mean omega", {}, {}, false};
    svg::Series sp{"mean p_des", {}, {}, true};
    for (const auto& [t, acc] : omega) {
        so.x.push_back(t);
        so.y.push_back(acc.first / acc.second);
    }
    for (const auto& [t, acc] : p_des) {
        sp.x.push_back(t);
        sp.y.push_back(acc.first / acc.second);
    }
    return {"guidance scale trace", "step t", "value", {so, sp}};
}

std::vector<svg::Panel> class_panels(const MetricsReport& report) {
    svg::Series prec{"precision", {}, {}, true};
    svg::Series fd{"frechet", {}, {}, true};
    for (const auto& c : report.per_class) {
        prec.x.push_back(c.cls);
        prec.y.push_back(c.precision);
        if (c.frechet) {
            fd.x.push_back(c.cls);
            fd.y.push_back(*c.frechet);
        }
    }
    return {{"precision by desired class", "class", "precision", {prec}},
            {"frechet distance by desired class", "class", "frechet", {fd}}};
}

}  // namespace

Experiment::Experiment(const ExperimentSpec& spec)
    : spec_(validated(spec)),
      world_(spec_.build_world()),
      schedule_(spec_.schedule.build()),
      models_(build_models(spec_, world_)),
      denoiser_(std::make_unique<GuidedDenoiser>(spec_.guidance, models_, schedule_)) {}

std::uint64_t reference_seed(const ExperimentSpec& spec) {
    return derive_stream(spec.base_seed, static_cast<std::uint64_t>(Stream::data));
}

BatchOutcome simulate(const ExperimentSpec& spec, unsigned threads) {
    const Experiment exp(spec);
    ChainOptions options;
    options.solver = spec.solver;
    options.retain_trajectory = spec.retain_trajectory;
    BatchOutcome out;
    out.chains = run_batch(exp.denoiser(), options, spec.class_policy, spec.chains, spec.base_seed,
                           threads);
    std::vector<LabeledSample> samples;
    std::vector<int> nfe;
    samples.reserve(out.chains.size());
    nfe.reserve(out.chains.size());
    for (const auto& c : out.chains) {
        samples.push_back({c.final_sample, c.c_des});
        nfe.push_back(c.nfe_total);
    }
    out.row.method = method_label(spec.guidance);
    out.row.seed = spec.base_seed;
    out.row.report = evaluate_samples(samples, nfe, exp.world(), exp.models().classifier,
                                      reference_seed(spec));
    return out;
}

std::string samples_csv(const std::vector<ChainResult>& chains, int dimension) {
    std::string s = "chain,c_des";
    for (int i = 1; i <= dimension; ++i) s += ",x_" + std::to_string(i);
    s += ",nfe\n";
    for (std::size_t i = 0; i < chains.size(); ++i) {
        const auto& c = chains[i];
        s += std::to_string(i) + "," + std::to_string(c.c_des);
        for (Eigen::Index j = 0; j < c.final_sample.size(); ++j) s += "," + g9(c.final_sample[j]);
        s += "," + std::to_string(c.nfe_total) + "\n";
    }
    return s;
}

std::string diagnostics_csv(const std::vector<ChainResult>& chains) {
    std::string s = "chain,t,p_des,omega,c_ref,guidance_active,classifier_invoked\n";
    for (std::size_t i = 0; i < chains.size(); ++i) {
        for (const auto& d : chains[i].diagnostics) {
            s += std::to_string(i) + "," + std::to_string(d.t) + ",";
            if (d.p_des) s += g9(*d.p_des);
            s += "," + g9(d.omega) + ",";
            if (d.c_ref) s += std::to_string(*d.c_ref);
            s += std::string(",") + (d.guidance_active ? "1" : "0") + "," +
                 (d.classifier_invoked ? "1" : "0") + "\n";
        }
    }
    return s;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::string s = "method,axis_value,precision,recall,frechet,nfe_mean,chains,seed\n";
    for (const auto& r : rows) {
        s += r.method + ",";
        if (r.axis_value) s += g9(*r.axis_value);
        s += "," + g9(r.report.precision) + ",";
        if (r.report.recall) s += g9(*r.report.recall);
        s += "," + g9(r.report.frechet) + "," + g9(r.report.nfe_mean) + "," +
             std::to_string(r.report.chains) + "," + std::to_string(r.seed) + "\n";
    }
    return s;
}

std::string classes_csv(const MetricsReport& report) {
    std::string s = "class,count,precision,frechet\n";
    for (const auto& c : report.per_class) {
        s += std::to_string(c.cls) + "," + std::to_string(c.count) + "," + g9(c.precision) + ",";
        if (c.frechet) s += g9(*c.frechet);
        s += "\n";
    }
    return s;
}

ReportRow run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
    spec.validate();
    const fs::path dir = options.out_dir.empty() ? fs::path(spec.output_dir) : fs::path(options.out_dir);
    prepare_dir(dir, options.force);
    const BatchOutcome out = simulate(spec, options.threads);
    const int d = spec.build_world().dimension();
    write_file(dir / "samples.csv", samples_csv(out.chains, d));
    write_file(dir / "diagnostics.csv", diagnostics_csv(out.chains));
    write_file(dir / "classes.csv", classes_csv(out.row.report));
    write_file(dir / "classes.svg", svg::render(class_panels(out.row.report)));
    write_file(dir / "omega.svg", svg::render({omega_panel(out.chains)}));
    write_file(dir / "report.csv", report_csv({out.row}));
    return out.row;
}

std::vector<ReportRow> run_sweep(const ExperimentSpec& spec, const std::string& axis,
                                 const std::vector<double>& values, const RunOptions& options) {
    if (values.empty()) throw ConfigError("values", "must not be empty");
    // Every point is validated before any sampling starts.
    std::vector<ExperimentSpec> points;
    for (double v : values) {
        ExperimentSpec p = spec;
        apply_axis(p, axis, v);
        p.sweep = SweepSpec{axis, {v}};
        p.validate();
        (void)Experiment(p);
        points.push_back(std::move(p));
    }
    const fs::path dir = options.out_dir.empty() ? fs::path(spec.output_dir) : fs::path(options.out_dir);
    prepare_dir(dir, options.force);
    std::vector<ReportRow> rows;
    const int d = spec.build_world().dimension();
    for (std::size_t i = 0; i < points.size(); ++i) {
        BatchOutcome out = simulate(points[i], options.threads);
        out.row.axis_value = values[i];
        const fs::path sub = dir / ("point_" + std::to_string(i));
        std::error_code ec;
        fs::create_directories(sub, ec);
        if (ec) throw IoError("cannot create '" + sub.string() + "': " + ec.message());
        write_file(sub / "samples.csv", samples_csv(out.chains, d));
        write_file(sub / "diagnostics.csv", diagnostics_csv(out.chains));
        rows.push_back(std::move(out.row));
    }
    svg::Series prec{"precision", values, {}, false};
    svg::Series fd{"frechet", values, {}, false};
    for (const auto& r : rows) {
        prec.y.push_back(r.report.precision);
        fd.y.push_back(r.report.frechet);
    }
    write_file(dir / "sweep.svg",
               svg::render({{"precision vs " + axis, axis, "precision", {prec}},
                            {"frechet distance vs " + axis, axis, "frechet", {fd}}}));
    write_file(dir / "report.csv", report_csv(rows));
    return rows;
}

LoadedSamples read_samples_csv(const std::string& path, int dimension) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    LoadedSamples out;
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
    const auto header_cols = std::count(line.begin(), line.end(), ',') + 1;
    if (header_cols != dimension + 3)
        throw ConfigError("samples", "'" + path + "' has " + std::to_string(header_cols) +
                                         " columns, expected " + std::to_string(dimension + 3));
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<long>(cells.size()) != header_cols)
            throw ParseError(row, 1, "expected " + std::to_string(header_cols) + " fields");
        try {
            LabeledSample s;
            s.c_des = std::stoi(cells[1]);
            s.x.resize(dimension);
            for (int j = 0; j < dimension; ++j) s.x[j] = std::stod(cells[static_cast<std::size_t>(2 + j)]);
            out.nfe.push_back(std::stoi(cells.back()));
            out.samples.push_back(std::move(s));
        } catch (const std::logic_error&) {
            throw ParseError(row, 1, "malformed number");
        }
    }
    return out;
}

ReportRow recompute_metrics(const ExperimentSpec& spec, const std::string& samples_path) {
    spec.validate();
    const MixtureWorld world = spec.build_world();
    const auto loaded = read_samples_csv(samples_path, world.dimension());
    for (const auto& s : loaded.samples)
        if (s.c_des < 0 || s.c_des >= world.class_count())
            throw ConfigError("c_des", "sample class " + std::to_string(s.c_des) + " is not in the world");
    const ClassifierModel classifier(world, spec.classifier.temperature, spec.classifier.label_noise);
    ReportRow row;
    row.method = method_label(spec.guidance);
    row.seed = spec.base_seed;
    row.report = evaluate_samples(loaded.samples, loaded.nfe, world, classifier, reference_seed(spec));
    return row;
}

}  // namespace gfcg
