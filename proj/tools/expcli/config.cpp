#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace expcli {

using finterp::ValidationError;

namespace {

std::string at(const YAML::Node& n) {
    const auto m = n.Mark();
    return m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : "";
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& what) { throw ValidationError(at(n) + what); }

void check_keys(const YAML::Node& map, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!map.IsMap()) fail(map, "'" + section + "' must be a mapping");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "' in " + section);
    }
}

double as_real(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n, key + ": expected a number");
    const auto s = n.Scalar();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) fail(n, key + ": expected a number, got '" + s + "'");
    return v;
}

std::uint64_t as_uint(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n, key + ": expected a non-negative integer");
    const auto s = n.Scalar();
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(n, key + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

bool as_bool(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n, key + ": expected true or false");
    const auto s = n.Scalar();
    if (s == "true") return true;
    if (s == "false") return false;
    fail(n, key + ": expected true or false, got '" + s + "'");
}

std::string as_string(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(n, key + ": expected a string");
    return n.Scalar();
}

std::string as_choice(const YAML::Node& n, const std::string& key, std::initializer_list<const char*> choices) {
    auto s = as_string(n, key);
    for (const char* c : choices)
        if (s == c) return s;
    std::string all;
    for (const char* c : choices) all += (all.empty() ? "" : ", ") + std::string(c);
    fail(n, key + ": '" + s + "' is not one of " + all);
}

std::vector<double> as_vector(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence() || n.size() == 0) fail(n, key + ": expected a non-empty list of numbers");
    std::vector<double> out;
    for (const auto& x : n) out.push_back(as_real(x, key));
    return out;
}

DatasetSpec parse_dataset(const YAML::Node& n, const std::string& section) {
    check_keys(n, section, {"source", "n", "d", "seed", "path", "skip_header", "points"});
    DatasetSpec d;
    if (!n["source"]) fail(n, section + ": missing 'source'");
    const auto src = as_choice(n["source"], section + ".source", {"uniform_toy", "csv", "inline"});
    if (src == "uniform_toy") {
        d.source = DatasetSpec::Source::uniform_toy;
        if (n["n"]) d.n = as_uint(n["n"], section + ".n");
        if (n["d"]) d.d = as_uint(n["d"], section + ".d");
        if (n["seed"]) d.seed = as_uint(n["seed"], section + ".seed");
        if (d.n == 0 || d.d == 0) fail(n, section + ": n and d must be >= 1");
    } else if (src == "csv") {
        d.source = DatasetSpec::Source::csv;
        if (!n["path"]) fail(n, section + ": csv source needs 'path'");
        d.path = as_string(n["path"], section + ".path");
        if (n["skip_header"]) d.skip_header = as_bool(n["skip_header"], section + ".skip_header");
    } else {
        d.source = DatasetSpec::Source::inline_points;
        if (!n["points"] || !n["points"].IsSequence() || n["points"].size() == 0)
            fail(n, section + ": inline source needs a non-empty 'points' list");
        for (const auto& p : n["points"]) d.points.push_back(as_vector(p, section + ".points"));
        for (const auto& p : d.points)
            if (p.size() != d.points.front().size()) fail(n["points"], section + ".points: rows differ in length");
    }
    return d;
}

void emit_dataset(YAML::Emitter& e, const DatasetSpec& d) {
    e << YAML::BeginMap;
    switch (d.source) {
        case DatasetSpec::Source::uniform_toy:
            e << YAML::Key << "source" << YAML::Value << "uniform_toy";
            e << YAML::Key << "n" << YAML::Value << d.n << YAML::Key << "d" << YAML::Value << d.d;
            e << YAML::Key << "seed" << YAML::Value << d.seed;
            break;
        case DatasetSpec::Source::csv:
            e << YAML::Key << "source" << YAML::Value << "csv";
            e << YAML::Key << "path" << YAML::Value << d.path;
            e << YAML::Key << "skip_header" << YAML::Value << d.skip_header;
            break;
        case DatasetSpec::Source::inline_points:
            e << YAML::Key << "source" << YAML::Value << "inline" << YAML::Key << "points" << YAML::Value
              << YAML::BeginSeq;
            for (const auto& p : d.points) {
                e << YAML::Flow << YAML::BeginSeq;
                for (double x : p) e << finterp::format_real(x);
                e << YAML::EndSeq;
            }
            e << YAML::EndSeq;
            break;
    }
    e << YAML::EndMap;
}

std::string mode_name(RunMode m) {
    switch (m) {
        case RunMode::deterministic: return "deterministic";
        case RunMode::stochastic: return "stochastic";
        case RunMode::two_sided: return "two_sided";
    }
    return "?";
}

}  // namespace

finterp::Schedule ScheduleSpec::build() const { return finterp::Schedule::from_name(kind, zeta, zeta_scale); }

finterp::TrainingSet DatasetSpec::build(const std::filesystem::path& base) const {
    switch (source) {
        case Source::uniform_toy: return finterp::uniform_toy(n, d, seed);
        case Source::csv: {
            std::filesystem::path p(path);
            if (p.is_relative() && !base.empty()) p = base / p;
            if (!std::filesystem::exists(p)) throw ValidationError("dataset file not found: " + p.string());
            return finterp::load_csv(p, skip_header);
        }
        case Source::inline_points: return finterp::TrainingSet::from_points(points, "inline");
    }
    throw ValidationError("dataset: unknown source");
}

finterp::ErrorModel ErrorSpec::build(std::uint64_t seed) const {
    const auto fam = finterp::error_family_from_name(family);
    if (direction) return finterp::ErrorModel::fixed(fam, lambda, *direction, clip);
    return finterp::ErrorModel::random(fam, lambda, finterp::substream_key(seed, 0x657073), clip);
}

finterp::SamplerConfig ExperimentConfig::sampler_config() const {
    finterp::SamplerConfig c;
    c.steps = sampler.steps;
    c.t_end = sampler.t_end;
    c.mode = sampler.mode == RunMode::stochastic ? finterp::SamplerMode::stochastic : finterp::SamplerMode::deterministic;
    c.record_trajectory = sampler.record_trajectory || sampler.trajectory_stride > 0;
    c.master_seed = seed;
    return c;
}

void ExperimentConfig::validate() const {
    sampler_config().validate();
    if (sampler.count == 0) throw ValidationError("sampler.count must be >= 1");
    const auto s = schedule.build();
    const auto rep = finterp::validate_schedule(s);
    // alpha/beta boundary conditions and derivative consistency are required; gamma(1) = 0 is not,
    // so gamma = t^2 can still be studied.
    for (const auto& c : rep.checks)
        if (!c.passed && c.name != "gamma(1)=0")
            throw ValidationError("schedule '" + s.id() + "' fails check '" + c.name + "'" +
                                  (c.detail.empty() ? "" : " (" + c.detail + ")"));
    if (sampler.mode == RunMode::two_sided) {
        if (!second_dataset) throw ValidationError("two_sided mode needs a second_dataset section");
        if (error_model) throw ValidationError("error_model is not supported in two_sided mode");
        if (s.gamma_is_zero()) throw ValidationError("two_sided mode needs a schedule with gamma > 0");
    }
    if (sampler.mode == RunMode::stochastic && s.zeta_is_zero())
        throw ValidationError("stochastic mode needs schedule.zeta other than none");
    if (sampler.mode == RunMode::stochastic && error_model)
        throw ValidationError("error_model is only supported in deterministic mode");
    if (error_model) {
        auto m = error_model->build(seed);
        if (m.family == finterp::ErrorFamily::gamma_scaled && s.gamma_is_zero())
            throw ValidationError("gamma_scaled error needs a schedule with gamma > 0");
    }
    if (!(analysis.threshold > 0.0) || !(analysis.tol_conv > 0.0)) throw ValidationError("analysis thresholds must be > 0");
    if (analysis.r_div && !(*analysis.r_div > 0.0)) throw ValidationError("analysis.r_div must be > 0");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ValidationError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw ValidationError("config must be a mapping at top level");
    check_keys(root, "config",
               {"name", "seed", "output_dir", "schedule", "dataset", "second_dataset", "sampler", "error_model", "analysis"});
    ExperimentConfig c;
    c.base_dir = base_dir;
    if (root["name"]) c.name = as_string(root["name"], "name");
    if (root["seed"]) c.seed = as_uint(root["seed"], "seed");
    if (root["output_dir"]) c.output_dir = as_string(root["output_dir"], "output_dir");

    if (const auto s = root["schedule"]) {
        check_keys(s, "schedule", {"kind", "zeta", "zeta_scale"});
        if (s["kind"])
            c.schedule.kind = as_choice(s["kind"], "schedule.kind",
                                        {"linear", "sqrt", "bridge", "bridge2", "quadratic", "quadratic-bridge"});
        if (s["zeta"]) c.schedule.zeta = as_choice(s["zeta"], "schedule.zeta", {"none", "constant", "bridge"});
        if (s["zeta_scale"]) c.schedule.zeta_scale = as_real(s["zeta_scale"], "schedule.zeta_scale");
        if (c.schedule.zeta_scale < 0.0) fail(s["zeta_scale"], "schedule.zeta_scale must be >= 0");
    }
    if (!root["dataset"]) throw ValidationError("config: missing 'dataset' section");
    c.dataset = parse_dataset(root["dataset"], "dataset");
    if (root["second_dataset"]) c.second_dataset = parse_dataset(root["second_dataset"], "second_dataset");

    if (const auto s = root["sampler"]) {
        check_keys(s, "sampler", {"mode", "steps", "t_end", "count", "record_trajectory", "trajectory_stride", "direction"});
        if (s["mode"]) {
            const auto m = as_choice(s["mode"], "sampler.mode", {"deterministic", "stochastic", "two_sided"});
            c.sampler.mode = m == "deterministic" ? RunMode::deterministic
                             : m == "stochastic"  ? RunMode::stochastic
                                                  : RunMode::two_sided;
        }
        if (s["steps"]) c.sampler.steps = as_uint(s["steps"], "sampler.steps");
        if (s["t_end"]) c.sampler.t_end = as_real(s["t_end"], "sampler.t_end");
        if (s["count"]) c.sampler.count = as_uint(s["count"], "sampler.count");
        if (s["record_trajectory"]) c.sampler.record_trajectory = as_bool(s["record_trajectory"], "sampler.record_trajectory");
        if (s["trajectory_stride"]) c.sampler.trajectory_stride = as_uint(s["trajectory_stride"], "sampler.trajectory_stride");
        if (s["direction"]) c.sampler.direction = as_choice(s["direction"], "sampler.direction", {"to_x", "to_y", "both"});
        if (s["steps"] && c.sampler.steps < 2) fail(s["steps"], "sampler.steps must be >= 2");
        if (s["t_end"] && !(c.sampler.t_end > 0.0 && c.sampler.t_end < 0.5)) fail(s["t_end"], "sampler.t_end must lie in (0, 0.5)");
        if (s["count"] && c.sampler.count == 0) fail(s["count"], "sampler.count must be >= 1");
    }
    if (const auto e = root["error_model"]) {
        check_keys(e, "error_model", {"family", "lambda", "direction", "clip"});
        ErrorSpec spec;
        if (!e["family"]) fail(e, "error_model: missing 'family'");
        spec.family = as_choice(e["family"], "error_model.family", {"bounded", "gamma_scaled", "density_inverse"});
        if (!e["lambda"]) fail(e, "error_model: missing 'lambda'");
        spec.lambda = as_real(e["lambda"], "error_model.lambda");
        if (spec.lambda < 0.0) fail(e["lambda"], "error_model.lambda must be >= 0");
        if (e["direction"]) {
            if (e["direction"].IsScalar()) {
                as_choice(e["direction"], "error_model.direction", {"random"});
            } else {
                spec.direction = as_vector(e["direction"], "error_model.direction");
            }
        }
        if (e["clip"]) spec.clip = as_real(e["clip"], "error_model.clip");
        if (!(spec.clip > 0.0)) fail(e["clip"], "error_model.clip must be > 0");
        c.error_model = spec;
    }
    if (const auto a = root["analysis"]) {
        check_keys(a, "analysis", {"threshold", "tol_conv", "r_div"});
        if (a["threshold"]) c.analysis.threshold = as_real(a["threshold"], "analysis.threshold");
        if (a["tol_conv"]) c.analysis.tol_conv = as_real(a["tol_conv"], "analysis.tol_conv");
        if (a["r_div"]) c.analysis.r_div = as_real(a["r_div"], "analysis.r_div");
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string to_yaml(const ExperimentConfig& c) {
    using finterp::format_real;
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << c.name;
    e << YAML::Key << "seed" << YAML::Value << c.seed;
    if (!c.output_dir.empty()) e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
    e << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "kind" << YAML::Value << c.schedule.kind;
    e << YAML::Key << "zeta" << YAML::Value << c.schedule.zeta;
    e << YAML::Key << "zeta_scale" << YAML::Value << format_real(c.schedule.zeta_scale);
    e << YAML::EndMap;
    e << YAML::Key << "dataset" << YAML::Value;
    emit_dataset(e, c.dataset);
    if (c.second_dataset) {
        e << YAML::Key << "second_dataset" << YAML::Value;
        emit_dataset(e, *c.second_dataset);
    }
    e << YAML::Key << "sampler" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mode" << YAML::Value << mode_name(c.sampler.mode);
    e << YAML::Key << "steps" << YAML::Value << c.sampler.steps;
    e << YAML::Key << "t_end" << YAML::Value << format_real(c.sampler.t_end);
    e << YAML::Key << "count" << YAML::Value << c.sampler.count;
    e << YAML::Key << "record_trajectory" << YAML::Value << c.sampler.record_trajectory;
    e << YAML::Key << "trajectory_stride" << YAML::Value << c.sampler.trajectory_stride;
    if (c.sampler.mode == RunMode::two_sided) e << YAML::Key << "direction" << YAML::Value << c.sampler.direction;
    e << YAML::EndMap;
    if (c.error_model) {
        const auto& m = *c.error_model;
        e << YAML::Key << "error_model" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "family" << YAML::Value << m.family;
        e << YAML::Key << "lambda" << YAML::Value << format_real(m.lambda);
        e << YAML::Key << "direction" << YAML::Value;
        if (m.direction) {
            e << YAML::Flow << YAML::BeginSeq;
            for (double x : *m.direction) e << format_real(x);
            e << YAML::EndSeq;
        } else {
            e << "random";
        }
        e << YAML::Key << "clip" << YAML::Value << format_real(m.clip);
        e << YAML::EndMap;
    }
    e << YAML::Key << "analysis" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "threshold" << YAML::Value << format_real(c.analysis.threshold);
    e << YAML::Key << "tol_conv" << YAML::Value << format_real(c.analysis.tol_conv);
    if (c.analysis.r_div) e << YAML::Key << "r_div" << YAML::Value << format_real(*c.analysis.r_div);
    e << YAML::EndMap;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::string toy_gamma_scaled(const std::string& name, const std::string& kind) {
    return "name: " + name + R"(
seed: 3
schedule: {kind: )" + kind + R"(}
dataset: {source: uniform_toy, n: 5, d: 2, seed: 7}
sampler: {mode: deterministic, count: 500}
error_model: {family: gamma_scaled, lambda: 1, direction: random}
)";
}

std::string toy_bounded(const std::string& name, const std::string& lambda) {
    return "name: " + name + R"(
seed: 2
schedule: {kind: sqrt}
dataset: {source: uniform_toy, n: 5, d: 2, seed: 7}
sampler: {mode: deterministic, count: 500}
error_model: {family: bounded, lambda: )" + lambda + R"(, direction: random}
)";
}

std::string toy_density(const std::string& name, const std::string& lambda) {
    return "name: " + name + R"(
seed: 4
schedule: {kind: sqrt}
dataset: {source: uniform_toy, n: 5, d: 2, seed: 7}
sampler: {mode: deterministic, count: 100, record_trajectory: true}
error_model: {family: density_inverse, lambda: )" + lambda + R"(, direction: random}
)";
}

std::string toy_stochastic(const std::string& name, const std::string& zeta) {
    return "name: " + name + R"(
seed: 1
schedule: {kind: sqrt, zeta: constant, zeta_scale: )" + zeta + R"(}
dataset: {source: uniform_toy, n: 5, d: 2, seed: 7}
sampler: {mode: stochastic, count: 2000}
)";
}

std::vector<Preset> make_presets() {
    std::vector<Preset> p;
    p.push_back({"fig1a", "deterministic generation, 5 toy anchors, sqrt schedule", R"(name: fig1a
seed: 1
schedule: {kind: sqrt}
dataset: {source: uniform_toy, n: 5, d: 2, seed: 7}
sampler: {mode: deterministic, count: 500}
)"});
    p.push_back({"fig1b", "stochastic generation, constant zeta, 2 int zeta = 0.016", toy_stochastic("fig1b", "0.008")});
    p.push_back({"fig1c", "stochastic generation, constant zeta, 2 int zeta = 0.079", toy_stochastic("fig1c", "0.0395")});
    for (const char* l : {"1", "5", "25"})
        p.push_back({std::string("fig2-lambda") + l, std::string("bounded error, ||eps||^2 = ") + l,
                     toy_bounded(std::string("fig2-lambda") + l, l)});
    p.push_back({"fig3-converge", "gamma-scaled error, gamma = sqrt(t(1-t))", toy_gamma_scaled("fig3-converge", "sqrt")});
    p.push_back({"fig3-vicinity", "gamma-scaled error, gamma = t(1-t)", toy_gamma_scaled("fig3-vicinity", "bridge")});
    p.push_back({"fig3-diverge", "gamma-scaled error, gamma = t^2(1-t)",
                 toy_gamma_scaled("fig3-diverge", "quadratic-bridge")});
    for (const char* l : {"1e-2", "1e-4", "1e-10"})
        p.push_back({std::string("fig4-lambda") + l, std::string("density-inverse error, lambda = ") + l,
                     toy_density(std::string("fig4-lambda") + l, l)});
    p.push_back({"two-sided", "two-sided generation between two 3-point sets", R"(name: two-sided
seed: 5
schedule: {kind: sqrt}
dataset: {source: uniform_toy, n: 3, d: 2, seed: 11}
second_dataset: {source: uniform_toy, n: 3, d: 2, seed: 12}
sampler: {mode: two_sided, count: 200, direction: both}
)"});
    return p;
}

}  // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> all = make_presets();
    return all;
}

const Preset* find_preset(const std::string& name) {
    static const std::vector<std::pair<std::string, std::string>> aliases{
        {"fig4-underfit", "fig4-lambda1e-2"}, {"fig4-intermediate", "fig4-lambda1e-4"}, {"fig4-overfit", "fig4-lambda1e-10"}};
    std::string target = name;
    for (const auto& [a, b] : aliases)
        if (a == name) target = b;
    for (const auto& p : presets())
        if (p.name == target) return &p;
    return nullptr;
}

}  // namespace expcli
