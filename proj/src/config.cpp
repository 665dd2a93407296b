#include "gfcg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "gfcg/errors.hpp"

namespace gfcg {

NoiseSchedule ScheduleSpec::build() const {
    if (kind == ScheduleKind::variance_preserving)
        return make_vp_schedule(steps, vp.beta_start, vp.beta_end);
    return make_ve_schedule(steps, ve.sigma_min, ve.sigma_max, ve.rho);
}

MixtureWorld ExperimentSpec::build_world() const {
    if (inline_world) return *inline_world;
    if (!fixture) throw ConfigError("world", "neither a fixture nor an inline world is given");
    return make_fixture(*fixture);
}

namespace {

bool uses(const GuidanceConfig& g, BaseMethod b) {
    switch (g.method) {
        case Method::ng: return b == BaseMethod::ng;
        case Method::cfg: return b == BaseMethod::cfg;
        case Method::atg: return b == BaseMethod::atg;
        case Method::cg: return b == BaseMethod::cg;
        case Method::gfcg: return false;
        case Method::gfcg_mixed:
        case Method::gfcg_additive: return g.base == b;
    }
    return false;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (fixture.has_value() == inline_world.has_value())
        throw ConfigError("world", "give exactly one of a fixture or an inline world");
    const MixtureWorld world = build_world();
    (void)schedule.build();
    if (chains < 1) throw ConfigError("chains", "must be >= 1");
    if (class_policy.kind == ClassPolicy::Kind::fixed &&
        (class_policy.fixed_class < 0 || class_policy.fixed_class >= world.class_count()))
        throw ConfigError("fixed_class", "must name a class of the world");
    if (schedule.kind == ScheduleKind::variance_preserving && solver == Solver::heun)
        throw ConfigError("solver", "heun needs a ve schedule; vp schedules use the ddim update");
    guidance.validate(schedule.steps);
    if (degradation) degradation->validate();
    if (uses(guidance, BaseMethod::atg) && !degradation)
        throw ConfigError("degradation", "autoguidance needs a [degradation] section");
    if (!(classifier.temperature > 0.0) || !std::isfinite(classifier.temperature))
        throw ConfigError("temperature", "must be > 0");
    if (!(classifier.label_noise >= 0.0 && classifier.label_noise < 1.0))
        throw ConfigError("label_noise", "must lie in [0, 1)");
    if (sweep) {
        const auto& axes = sweep_axes();
        if (std::find(axes.begin(), axes.end(), sweep->axis) == axes.end())
            throw ConfigError("axis", "'" + sweep->axis + "' is not a sweepable field");
        if (sweep->values.empty()) throw ConfigError("values", "must not be empty");
    }
}

std::string method_label(const GuidanceConfig& config) {
    std::string label(to_string(config.method));
    if (config.method == Method::gfcg_mixed || config.method == Method::gfcg_additive)
        label += "(" + std::string(to_string(config.base)) + ")";
    return label;
}

namespace {

// ---- lexical layer -------------------------------------------------------

struct Scalar {
    std::string text;
    bool quoted = false;
    int column = 0;
};

struct Value {
    bool is_list = false;
    std::vector<Scalar> items;
    int column = 0;
};

struct Entry {
    std::string key;
    Value value;
    int line = 0;
    int column = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<Entry> entries;
};

bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' ||
           c == '+' || c == '/';
}

class LineScanner {
public:
    LineScanner(std::string_view text, int line) : text_(text), line_(line) {}

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    bool at_end() {
        skip_space();
        return pos_ >= text_.size() || text_[pos_] == '#';
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    int column() const { return static_cast<int>(pos_) + 1; }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, column(), msg); }

    void expect(char c) {
        skip_space();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string bare() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && bare_char(text_[pos_])) ++pos_;
        if (pos_ == start) fail("expected a name or value");
        return std::string(text_.substr(start, pos_ - start));
    }

    Scalar scalar() {
        skip_space();
        Scalar s;
        s.column = column();
        if (peek() == '"') {
            ++pos_;
            const std::size_t start = pos_;
            while (pos_ < text_.size() && text_[pos_] != '"') ++pos_;
            if (pos_ >= text_.size()) fail("unterminated string");
            s.text = std::string(text_.substr(start, pos_ - start));
            s.quoted = true;
            ++pos_;
            return s;
        }
        s.text = bare();
        return s;
    }

    Value value() {
        skip_space();
        Value v;
        v.column = column();
        if (peek() == '[') {
            ++pos_;
            v.is_list = true;
            skip_space();
            if (peek() == ']') {
                ++pos_;
                return v;
            }
            for (;;) {
                v.items.push_back(scalar());
                skip_space();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() == ']') {
                    ++pos_;
                    break;
                }
                fail("expected ',' or ']' in list");
            }
            return v;
        }
        v.items.push_back(scalar());
        return v;
    }

private:
    std::string_view text_;
    int line_;
    std::size_t pos_ = 0;
};

std::vector<Section> lex(std::string_view text) {
    std::vector<Section> sections;
    std::set<std::string> seen_sections;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(start, end - start);
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        ++line_no;
        LineScanner sc(raw, line_no);
        if (!sc.at_end()) {
            if (sc.peek() == '[') {
                sc.expect('[');
                Section s;
                s.line = line_no;
                const int col = sc.column();
                s.name = sc.bare();
                sc.expect(']');
                if (!sc.at_end()) sc.fail("unexpected text after section header");
                if (!seen_sections.insert(s.name).second)
                    throw ParseError(line_no, col, "duplicate section [" + s.name + "]");
                sections.push_back(std::move(s));
            } else {
                if (sections.empty()) sc.fail("key outside of any section");
                Entry e;
                e.line = line_no;
                sc.skip_space();
                e.column = sc.column();
                e.key = sc.bare();
                sc.expect('=');
                e.value = sc.value();
                if (!sc.at_end()) sc.fail("unexpected text after value");
                for (const auto& other : sections.back().entries)
                    if (other.key == e.key)
                        throw ParseError(line_no, e.column, "duplicate key '" + e.key + "'");
                sections.back().entries.push_back(std::move(e));
            }
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    return sections;
}

// ---- typed access --------------------------------------------------------

class Reader {
public:
    explicit Reader(const Section* section) : section_(section) {}

    bool has(const std::string& key) const { return find(key) != nullptr; }

    const Entry* take(const std::string& key) {
        const Entry* e = find(key);
        if (e) used_.insert(key);
        return e;
    }

    const Scalar& scalar(const Entry& e) const {
        if (e.value.is_list || e.value.items.size() != 1)
            throw ConfigError(e.key, "expected a single value");
        return e.value.items.front();
    }

    static double to_double(const std::string& field, const Scalar& s) {
        double v = 0.0;
        const char* b = s.text.data();
        const char* end = b + s.text.size();
        if (s.quoted || s.text.empty() || *b == '+') throw ConfigError(field, "expected a number");
        const auto [ptr, ec] = std::from_chars(b, end, v);
        if (ec != std::errc() || ptr != end || !std::isfinite(v))
            throw ConfigError(field, "expected a finite number, got '" + s.text + "'");
        return v;
    }

    static long long to_int(const std::string& field, const Scalar& s) {
        long long v = 0;
        const char* b = s.text.data();
        const char* end = b + s.text.size();
        const auto [ptr, ec] = std::from_chars(b, end, v);
        if (s.quoted || ec != std::errc() || ptr != end)
            throw ConfigError(field, "expected an integer, got '" + s.text + "'");
        return v;
    }

    void number(const std::string& key, double& out) {
        if (const Entry* e = take(key)) out = to_double(key, scalar(*e));
    }

    void integer(const std::string& key, int& out) {
        if (const Entry* e = take(key)) {
            const long long v = to_int(key, scalar(*e));
            if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
                throw ConfigError(key, "out of range");
            out = static_cast<int>(v);
        }
    }

    void unsigned64(const std::string& key, std::uint64_t& out) {
        if (const Entry* e = take(key)) {
            const Scalar& s = scalar(*e);
            const char* b = s.text.data();
            const char* end = b + s.text.size();
            const auto [ptr, ec] = std::from_chars(b, end, out);
            if (s.quoted || ec != std::errc() || ptr != end)
                throw ConfigError(key, "expected a non-negative integer, got '" + s.text + "'");
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const Entry* e = take(key)) {
            const Scalar& s = scalar(*e);
            if (s.text == "true") out = true;
            else if (s.text == "false") out = false;
            else throw ConfigError(key, "expected true or false");
        }
    }

    std::optional<std::string> word(const std::string& key) {
        if (const Entry* e = take(key)) return scalar(*e).text;
        return std::nullopt;
    }

    std::optional<std::vector<double>> numbers(const std::string& key) {
        const Entry* e = take(key);
        if (!e) return std::nullopt;
        if (!e->value.is_list) throw ConfigError(key, "expected a bracketed list");
        std::vector<double> out;
        for (const auto& s : e->value.items) out.push_back(to_double(key, s));
        return out;
    }

    void reject_unknown() const {
        if (!section_) return;
        for (const auto& e : section_->entries)
            if (!used_.count(e.key))
                throw ParseError(e.line, e.column,
                                 "unknown key '" + e.key + "' in [" + section_->name + "]");
    }

private:
    const Entry* find(const std::string& key) const {
        if (!section_) return nullptr;
        for (const auto& e : section_->entries)
            if (e.key == key) return &e;
        return nullptr;
    }

    const Section* section_;
    std::set<std::string> used_;
};

template <class Enum>
Enum pick(const std::string& field, const std::string& text,
          std::initializer_list<std::pair<const char*, Enum>> options) {
    for (const auto& [name, value] : options)
        if (text == name) return value;
    std::string allowed;
    for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw ConfigError(field, "'" + text + "' is not one of: " + allowed);
}

// Parses "world.class.<c>.component.<k>".
std::optional<std::pair<int, int>> component_address(const std::string& name) {
    int c = -1;
    int k = -1;
    char tail = 0;
    if (std::sscanf(name.c_str(), "world.class.%d.component.%d%c", &c, &k, &tail) == 2 && c >= 0 &&
        k >= 0 && name == "world.class." + std::to_string(c) + ".component." + std::to_string(k))
        return std::pair{c, k};
    return std::nullopt;
}

Vector as_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MixtureWorld bind_inline_world(Reader& world_reader,
                               const std::map<std::pair<int, int>, const Section*>& blocks,
                               int world_line) {
    int dimension = 0;
    world_reader.integer("dimension", dimension);
    auto priors = world_reader.numbers("priors");
    if (dimension < 1) throw ConfigError("dimension", "inline world needs dimension >= 1");
    if (!priors) throw ConfigError("priors", "inline world needs priors");
    const int classes = static_cast<int>(priors->size());
    std::vector<ClassMixture> mixtures(static_cast<std::size_t>(classes));
    for (const auto& [addr, section] : blocks) {
        const auto [c, k] = addr;
        if (c >= classes)
            throw ParseError(section->line, 1, "class index beyond the priors list");
        auto& comps = mixtures[static_cast<std::size_t>(c)].components;
        if (k != static_cast<int>(comps.size()))
            throw ParseError(section->line, 1, "component indices must be contiguous from 0");
        Reader r(section);
        Component comp;
        r.number("weight", comp.weight);
        const auto mean = r.numbers("mean");
        const auto cov = r.numbers("covariance");
        r.reject_unknown();
        if (!mean || static_cast<int>(mean->size()) != dimension)
            throw ConfigError("mean", "needs " + std::to_string(dimension) + " entries");
        if (!cov || static_cast<int>(cov->size()) != dimension * dimension)
            throw ConfigError("covariance",
                              "needs " + std::to_string(dimension * dimension) + " row-major entries");
        comp.mean = as_vector(*mean);
        comp.covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                         Eigen::RowMajor>>(cov->data(), dimension,
                                                                           dimension);
        comps.push_back(std::move(comp));
    }
    for (int c = 0; c < classes; ++c)
        if (mixtures[static_cast<std::size_t>(c)].components.empty())
            throw ParseError(world_line, 1, "class " + std::to_string(c) + " has no components");
    try {
        return MixtureWorld(*priors, std::move(mixtures));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("world", e.what());
    }
}

}  // namespace

ExperimentSpec parse_config(std::string_view text) {
    const auto sections = lex(text);
    std::map<std::string, const Section*> named;
    std::map<std::pair<int, int>, const Section*> blocks;
    static const std::set<std::string> known = {"experiment", "world",      "schedule",   "guidance",
                                                "degradation", "classifier", "output", "sweep"};
    for (const auto& s : sections) {
        if (known.count(s.name)) named[s.name] = &s;
        else if (auto addr = component_address(s.name)) blocks[*addr] = &s;
        else throw ParseError(s.line, 2, "unknown section [" + s.name + "]");
    }
    auto section = [&](const std::string& n) -> const Section* {
        const auto it = named.find(n);
        return it == named.end() ? nullptr : it->second;
    };

    ExperimentSpec spec;

    // [world]
    {
        Reader r(section("world"));
        const auto fixture = r.word("fixture");
        if (fixture) {
            if (r.has("dimension") || r.has("priors") || !blocks.empty())
                throw ConfigError("fixture", "a fixture cannot be combined with an inline world");
            spec.fixture = *fixture;
            (void)make_fixture(*fixture);
        } else if (r.has("priors") || r.has("dimension") || !blocks.empty()) {
            spec.fixture.reset();
            spec.inline_world = bind_inline_world(r, blocks, section("world") ? section("world")->line : 1);
        }
        r.reject_unknown();
    }

    // [schedule]
    {
        Reader r(section("schedule"));
        if (auto kind = r.word("kind"))
            spec.schedule.kind = pick<ScheduleKind>("kind", *kind,
                                                    {{"ve", ScheduleKind::variance_exploding},
                                                     {"vp", ScheduleKind::variance_preserving}});
        if (spec.schedule.kind == ScheduleKind::variance_preserving) spec.schedule.steps = 1000;
        r.integer("steps", spec.schedule.steps);
        r.number("sigma_min", spec.schedule.ve.sigma_min);
        r.number("sigma_max", spec.schedule.ve.sigma_max);
        r.number("rho", spec.schedule.ve.rho);
        r.number("beta_start", spec.schedule.vp.beta_start);
        r.number("beta_end", spec.schedule.vp.beta_end);
        if (auto p = r.word("parameterization"))
            spec.schedule.parameterization = pick<Parameterization>(
                "parameterization", *p,
                {{"edm_d", Parameterization::edm_d},
                 {"x0", Parameterization::x0_prediction},
                 {"noise", Parameterization::noise_prediction}});
        else if (spec.schedule.kind == ScheduleKind::variance_preserving)
            spec.schedule.parameterization = Parameterization::noise_prediction;
        r.reject_unknown();
        (void)spec.schedule.build();
    }

    // [experiment]
    {
        Reader r(section("experiment"));
        r.integer("chains", spec.chains);
        r.unsigned64("base_seed", spec.base_seed);
        if (auto policy = r.word("class_policy"))
            spec.class_policy.kind =
                pick<ClassPolicy::Kind>("class_policy", *policy,
                                        {{"round_robin", ClassPolicy::Kind::round_robin},
                                         {"fixed", ClassPolicy::Kind::fixed}});
        r.integer("fixed_class", spec.class_policy.fixed_class);
        if (spec.schedule.kind == ScheduleKind::variance_preserving) spec.solver = Solver::euler;
        if (auto solver = r.word("solver"))
            spec.solver = pick<Solver>("solver", *solver,
                                       {{"heun", Solver::heun}, {"euler", Solver::euler}});
        r.boolean("retain_trajectory", spec.retain_trajectory);
        r.reject_unknown();
    }

    // [guidance]
    {
        Reader r(section("guidance"));
        GuidanceConfig& g = spec.guidance;
        if (auto m = r.word("method")) {
            const auto parsed = parse_method(*m);
            if (!parsed) throw ConfigError("method", "unknown method '" + *m + "'");
            g.method = *parsed;
        }
        if (auto b = r.word("base")) {
            const auto parsed = parse_base_method(*b);
            if (!parsed) throw ConfigError("base", "unknown base method '" + *b + "'");
            g.base = *parsed;
        }
        auto required = [&](const std::string& key, bool needed, const char* why) {
            if (needed && !r.has(key)) throw ConfigError(key, std::string("required for ") + why);
        };
        required("alpha", g.is_gfcg_family(), "gfcg methods");
        required("beta", g.is_gfcg_family(), "gfcg methods");
        required("omega_cfg", uses(g, BaseMethod::cfg), "classifier-free guidance");
        required("omega_atg", uses(g, BaseMethod::atg), "autoguidance");
        required("cg_scale", uses(g, BaseMethod::cg), "classifier guidance");
        r.number("alpha", g.alpha);
        r.number("beta", g.beta);
        r.number("tau", g.tau);
        r.number("omega_cfg", g.omega_cfg);
        r.number("omega_atg", g.omega_atg);
        r.number("cg_scale", g.cg_scale);
        g.t_s = spec.schedule.steps;
        r.integer("t_s", g.t_s);
        if (const Entry* e = r.take("s_cp")) {
            const Scalar& s = r.scalar(*e);
            if (s.text == "max") g.s_cp = spec.schedule.steps;
            else g.s_cp = static_cast<int>(Reader::to_int("s_cp", s));
        }
        r.boolean("stochastic_ref", g.stochastic_ref);
        if (auto x = r.word("x0_estimate"))
            g.x0_estimate = pick<X0Estimate>("x0_estimate", *x,
                                             {{"single_step", X0Estimate::single_step},
                                              {"multistep", X0Estimate::multistep}});
        r.integer("multistep_steps", g.multistep.steps);
        r.number("multistep_sigma_min", g.multistep.sigma_min);
        r.number("multistep_rho", g.multistep.rho);
        if (auto m = r.word("reference_model"))
            g.reference_model = pick<ReferenceModel>("reference_model", *m,
                                                     {{"automatic", ReferenceModel::automatic},
                                                      {"main", ReferenceModel::main},
                                                      {"degraded", ReferenceModel::degraded}});
        r.reject_unknown();
    }

    if (const Section* s = section("degradation")) {
        Reader r(s);
        DegradationParams d;
        r.number("mean_jitter", d.mean_jitter);
        r.number("cov_inflation", d.cov_inflation);
        r.number("weight_smoothing", d.weight_smoothing);
        r.unsigned64("jitter_seed", d.jitter_seed);
        r.reject_unknown();
        spec.degradation = d;
    }

    {
        Reader r(section("classifier"));
        r.number("temperature", spec.classifier.temperature);
        r.number("label_noise", spec.classifier.label_noise);
        r.reject_unknown();
    }

    {
        Reader r(section("output"));
        if (auto dir = r.word("dir")) spec.output_dir = *dir;
        r.reject_unknown();
    }

    if (const Section* s = section("sweep")) {
        Reader r(s);
        SweepSpec sw;
        const auto axis = r.word("axis");
        const auto values = r.numbers("values");
        r.reject_unknown();
        if (!axis) throw ConfigError("axis", "required in [sweep]");
        if (!values) throw ConfigError("values", "required in [sweep]");
        sw.axis = *axis;
        sw.values = *values;
        spec.sweep = sw;
    }

    spec.validate();
    return spec;
}

ExperimentSpec load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string list(const double* data, Eigen::Index n) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < n; ++i) out += (i ? ", " : "") + num(data[i]);
    return out + "]";
}

const char* param_name(Parameterization p) {
    switch (p) {
        case Parameterization::edm_d: return "edm_d";
        case Parameterization::x0_prediction: return "x0";
        case Parameterization::noise_prediction: return "noise";
    }
    return "edm_d";
}

const char* reference_name(ReferenceModel m) {
    switch (m) {
        case ReferenceModel::automatic: return "automatic";
        case ReferenceModel::main: return "main";
        case ReferenceModel::degraded: return "degraded";
    }
    return "automatic";
}

bool needs_quotes(const std::string& s) {
    return s.empty() || !std::all_of(s.begin(), s.end(), bare_char);
}

std::string word(const std::string& s) { return needs_quotes(s) ? "\"" + s + "\"" : s; }

}  // namespace

std::string emit_config(const ExperimentSpec& spec) {
    std::ostringstream os;
    os << "[experiment]\n"
       << "chains = " << spec.chains << "\n"
       << "base_seed = " << spec.base_seed << "\n"
       << "class_policy = "
       << (spec.class_policy.kind == ClassPolicy::Kind::fixed ? "fixed" : "round_robin") << "\n"
       << "fixed_class = " << spec.class_policy.fixed_class << "\n"
       << "solver = " << (spec.solver == Solver::heun ? "heun" : "euler") << "\n"
       << "retain_trajectory = " << (spec.retain_trajectory ? "true" : "false") << "\n\n";

    os << "[world]\n";
    if (spec.fixture) {
        os << "fixture = " << word(*spec.fixture) << "\n";
    } else {
        const MixtureWorld& w = *spec.inline_world;
        os << "dimension = " << w.dimension() << "\n"
           << "priors = " << list(w.priors().data(), static_cast<Eigen::Index>(w.priors().size()))
           << "\n";
        for (int c = 0; c < w.class_count(); ++c) {
            const auto& comps = w.classes()[static_cast<std::size_t>(c)].components;
            for (std::size_t k = 0; k < comps.size(); ++k) {
                const auto& comp = comps[k];
                const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cov =
                    comp.covariance;
                os << "\n[world.class." << c << ".component." << k << "]\n"
                   << "weight = " << num(comp.weight) << "\n"
                   << "mean = " << list(comp.mean.data(), comp.mean.size()) << "\n"
                   << "covariance = " << list(cov.data(), cov.size()) << "\n";
            }
        }
    }

    const auto& s = spec.schedule;
    os << "\n[schedule]\n"
       << "kind = " << (s.kind == ScheduleKind::variance_exploding ? "ve" : "vp") << "\n"
       << "steps = " << s.steps << "\n"
       << "sigma_min = " << num(s.ve.sigma_min) << "\n"
       << "sigma_max = " << num(s.ve.sigma_max) << "\n"
       << "rho = " << num(s.ve.rho) << "\n"
       << "beta_start = " << num(s.vp.beta_start) << "\n"
       << "beta_end = " << num(s.vp.beta_end) << "\n"
       << "parameterization = " << param_name(s.parameterization) << "\n";

    const auto& g = spec.guidance;
    os << "\n[guidance]\n"
       << "method = " << to_string(g.method) << "\n"
       << "base = " << to_string(g.base) << "\n"
       << "alpha = " << num(g.alpha) << "\n"
       << "beta = " << num(g.beta) << "\n"
       << "tau = " << num(g.tau) << "\n"
       << "omega_cfg = " << num(g.omega_cfg) << "\n"
       << "omega_atg = " << num(g.omega_atg) << "\n"
       << "cg_scale = " << num(g.cg_scale) << "\n"
       << "t_s = " << g.t_s << "\n"
       << "s_cp = " << g.s_cp << "\n"
       << "stochastic_ref = " << (g.stochastic_ref ? "true" : "false") << "\n"
       << "x0_estimate = "
       << (g.x0_estimate == X0Estimate::multistep ? "multistep" : "single_step") << "\n"
       << "multistep_steps = " << g.multistep.steps << "\n"
       << "multistep_sigma_min = " << num(g.multistep.sigma_min) << "\n"
       << "multistep_rho = " << num(g.multistep.rho) << "\n"
       << "reference_model = " << reference_name(g.reference_model) << "\n";

    if (spec.degradation) {
        const auto& d = *spec.degradation;
        os << "\n[degradation]\n"
           << "mean_jitter = " << num(d.mean_jitter) << "\n"
           << "cov_inflation = " << num(d.cov_inflation) << "\n"
           << "weight_smoothing = " << num(d.weight_smoothing) << "\n"
           << "jitter_seed = " << d.jitter_seed << "\n";
    }

    os << "\n[classifier]\n"
       << "temperature = " << num(spec.classifier.temperature) << "\n"
       << "label_noise = " << num(spec.classifier.label_noise) << "\n";

    os << "\n[output]\ndir = " << word(spec.output_dir) << "\n";

    if (spec.sweep) {
        os << "\n[sweep]\naxis = " << word(spec.sweep->axis) << "\n"
           << "values = "
           << list(spec.sweep->values.data(), static_cast<Eigen::Index>(spec.sweep->values.size()))
           << "\n";
    }
    return os.str();
}

const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes = {
        "alpha",         "beta",        "tau",          "t_s",
        "s_cp",          "omega_cfg",   "omega_atg",    "cg_scale",
        "cov_inflation", "mean_jitter", "weight_smoothing", "temperature",
        "label_noise",   "multistep_steps", "multistep_sigma_min"};
    return axes;
}

void apply_axis(ExperimentSpec& spec, std::string_view axis_view, double value) {
    const std::string axis(axis_view);
    auto integral = [&]() {
        if (value != std::floor(value) || std::abs(value) > 1e9)
            throw ConfigError(axis, "sweep value " + num(value) + " is not an integer");
        return static_cast<int>(value);
    };
    auto degradation = [&]() -> DegradationParams& {
        if (!spec.degradation) throw ConfigError(axis, "needs a [degradation] section to sweep");
        return *spec.degradation;
    };
    GuidanceConfig& g = spec.guidance;
    if (axis == "alpha") g.alpha = value;
    else if (axis == "beta") g.beta = value;
    else if (axis == "tau") g.tau = value;
    else if (axis == "t_s") g.t_s = integral();
    else if (axis == "s_cp") g.s_cp = integral();
    else if (axis == "omega_cfg") g.omega_cfg = value;
    else if (axis == "omega_atg") g.omega_atg = value;
    else if (axis == "cg_scale") g.cg_scale = value;
    else if (axis == "cov_inflation") degradation().cov_inflation = value;
    else if (axis == "mean_jitter") degradation().mean_jitter = value;
    else if (axis == "weight_smoothing") degradation().weight_smoothing = value;
    else if (axis == "temperature") spec.classifier.temperature = value;
    else if (axis == "label_noise") spec.classifier.label_noise = value;
    else if (axis == "multistep_steps") g.multistep.steps = integral();
    else if (axis == "multistep_sigma_min") g.multistep.sigma_min = value;
    else throw ConfigError("axis", "'" + axis + "' is not a sweepable field");
}

}  // namespace gfcg
