#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "run.hpp"
#include "verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_validation = 1;
constexpr int exit_runtime = 2;
constexpr int exit_verify = 3;

std::vector<double> parse_list(const std::string& text, const char* what) {
    try {
        return finterp::detail::parse_row(text, 0);
    } catch (const finterp::Error&) {
        throw finterp::ValidationError(std::string(what) + ": expected comma-separated numbers, got '" + text + "'");
    }
}

finterp::TrainingSet load_or_toy(const std::string& path, bool skip_header, std::size_t n, std::size_t d,
                                 std::uint64_t seed) {
    if (!path.empty()) {
        if (!fs::exists(path)) throw finterp::ValidationError("file not found: " + path);
        return finterp::load_csv(path, skip_header);
    }
    return finterp::uniform_toy(n, d, seed);
}

/// Reads endpoint rows from either an endpoints.csv written by this tool (z_* columns) or a plain
/// numeric CSV.
void read_samples(const std::string& path, std::vector<std::vector<double>>& points, std::vector<bool>& diverged) {
    std::ifstream in(path);
    if (!in) throw finterp::ValidationError("cannot read samples file " + path);
    std::string line;
    std::size_t row = 0;
    std::vector<std::size_t> zcols;
    std::optional<std::size_t> divcol;
    bool header = false;
    while (std::getline(in, line)) {
        ++row;
        const auto t = finterp::detail::trim(line);
        if (t.empty()) continue;
        if (row == 1 && t.find("z_0") != std::string_view::npos) {
            header = true;
            std::stringstream ss{std::string(t)};
            std::string cell;
            for (std::size_t col = 0; std::getline(ss, cell, ','); ++col) {
                cell = std::string(finterp::detail::trim(cell));
                if (cell.rfind("z_", 0) == 0) zcols.push_back(col);
                if (cell == "diverged") divcol = col;
            }
            continue;
        }
        if (header) {
            std::vector<std::string> cells;
            std::stringstream ss{std::string(t)};
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            std::vector<double> z;
            for (auto c : zcols) {
                if (c >= cells.size()) throw finterp::ParseError(row, "missing column " + std::to_string(c + 1));
                z.push_back(finterp::detail::parse_real(cells[c], row, c + 1));
            }
            points.push_back(std::move(z));
            diverged.push_back(divcol && *divcol < cells.size() && finterp::detail::trim(cells[*divcol]) == "1");
        } else {
            points.push_back(finterp::detail::parse_row(t, row));
            diverged.push_back(false);
            if (points.back().size() != points.front().size()) throw finterp::ParseError(row, "ragged row");
        }
    }
    if (points.empty()) throw finterp::ValidationError("samples file " + path + " has no rows");
}

void print_summary(const expcli::RunManifest& m, const fs::path& dir) {
    const auto& s = m.summary;
    std::cout << "experiment " << s.value("name", std::string("?")) << " -> " << dir.string() << "\n";
    std::cout << "  count               " << s["count"] << "\n";
    std::cout << "  classes             converged=" << s["classes"]["converged"] << " vicinity=" << s["classes"]["vicinity"]
              << " diverged=" << s["classes"]["diverged"] << "\n";
    std::cout << "  memorized_fraction  " << s["memorized_fraction"] << "\n";
    if (!s["sigma2_hat"].is_null()) std::cout << "  sigma2_hat          " << s["sigma2_hat"] << "\n";
    if (s.contains("monotone_divergence"))
        std::cout << "  monotone_divergence " << s["monotone_divergence"]["true"] << "/" << s["monotone_divergence"]["recorded"]
                  << "\n";
    if (s.contains("predicted_outcome")) std::cout << "  predicted           " << s["predicted_outcome"] << "\n";
    std::cout << "  config_hash         " << m.config_hash << "\n";
    std::cout << "  duration            " << m.duration_seconds << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact-field interpolant sampler and memorization experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    unsigned threads = 0;
    app.add_option("--seed", seed, "master seed (overrides config)");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

    // schedules
    auto* sched = app.add_subcommand("schedules", "schedule families");
    sched->require_subcommand(1);
    sched->fallthrough();
    auto* sched_list = sched->add_subcommand("list", "list built-in schedules with validation status and regime");

    // dataset
    auto* ds = app.add_subcommand("dataset", "training sets");
    ds->require_subcommand(1);
    ds->fallthrough();
    auto* ds_gen = ds->add_subcommand("gen", "write a uniform toy set");
    std::size_t gen_n = 5, gen_d = 2;
    std::string gen_out;
    ds_gen->add_option("--n", gen_n, "number of points")->check(CLI::PositiveNumber);
    ds_gen->add_option("--d", gen_d, "dimension")->check(CLI::PositiveNumber);
    ds_gen->add_option("--out", gen_out, "output CSV")->required();
    auto* ds_val = ds->add_subcommand("validate", "check a CSV training set");
    std::string val_path;
    bool val_skip = false;
    ds_val->add_option("path", val_path, "CSV file")->required();
    ds_val->add_flag("--skip-header", val_skip, "ignore the first line");

    // field eval
    auto* field = app.add_subcommand("field", "closed-form fields");
    field->require_subcommand(1);
    field->fallthrough();
    auto* feval = field->add_subcommand("eval", "evaluate a field at one (z, t)");
    std::string which = "velocity", z_text, train, second, schedule = "sqrt";
    double t_val = 0.5;
    bool skip_header = false;
    feval->add_option("--which", which, "velocity | score | logdensity | two-sided")
        ->check(CLI::IsMember({"velocity", "score", "logdensity", "two-sided"}));
    feval->add_option("--z", z_text, "point, comma-separated")->required();
    feval->add_option("--t", t_val, "time")->required();
    feval->add_option("--train", train, "training CSV (default: 5-point toy set)");
    feval->add_option("--second", second, "second CSV for two-sided");
    feval->add_option("--schedule", schedule, "schedule kind");
    feval->add_flag("--skip-header", skip_header, "CSV files have a header line");

    // sample
    auto* samp = app.add_subcommand("sample", "generate samples");
    std::string s_mode = "deterministic", s_zeta = "none", s_out = "endpoints.csv", s_traj, s_family, s_dir = "random";
    double s_zeta_scale = 0.0, s_t_end = finterp::SamplerConfig::default_t_end, s_lambda = 0.0, s_clip = 1e12;
    std::size_t s_steps = finterp::SamplerConfig::default_steps, s_count = 100, s_stride = 100;
    samp->add_option("--train", train, "training CSV (default: 5-point toy set)");
    samp->add_flag("--skip-header", skip_header, "training CSV has a header line");
    samp->add_option("--schedule", schedule, "schedule kind");
    samp->add_option("--zeta", s_zeta, "none | constant | bridge");
    samp->add_option("--zeta-scale", s_zeta_scale, "zeta scale");
    samp->add_option("--mode", s_mode, "deterministic | stochastic")->check(CLI::IsMember({"deterministic", "stochastic"}));
    samp->add_option("--steps", s_steps, "Euler steps");
    samp->add_option("--t-end", s_t_end, "final time");
    samp->add_option("--count", s_count, "number of samples");
    samp->add_option("--out", s_out, "endpoints CSV");
    samp->add_option("--traj-out", s_traj, "trajectories CSV");
    samp->add_option("--traj-stride", s_stride, "keep every k-th state in --traj-out");
    samp->add_option("--error-family", s_family, "bounded | gamma_scaled | density_inverse");
    samp->add_option("--lambda", s_lambda, "error magnitude");
    samp->add_option("--error-direction", s_dir, "'random' or comma-separated vector");
    samp->add_option("--clip", s_clip, "error clip norm");

    // analyze
    auto* an = app.add_subcommand("analyze", "memorization and class statistics of endpoints");
    std::string a_samples, a_report = "report.json";
    expcli::AnalysisSpec a_opt;
    std::optional<double> a_rdiv;
    an->add_option("--samples", a_samples, "endpoints CSV")->required();
    an->add_option("--train", train, "training CSV")->required();
    an->add_flag("--skip-header", skip_header, "training CSV has a header line");
    an->add_option("--report", a_report, "report JSON path");
    an->add_option("--threshold", a_opt.threshold, "memorization ratio threshold");
    an->add_option("--tol-conv", a_opt.tol_conv, "CONVERGED radius");
    an->add_option("--r-div", a_rdiv, "DIVERGED radius");

    // experiment
    auto* ex = app.add_subcommand("experiment", "named reproducible experiments");
    ex->require_subcommand(1);
    ex->fallthrough();
    auto* ex_list = ex->add_subcommand("list", "list presets");
    auto* ex_run = ex->add_subcommand("run", "run a preset or config file");
    std::string ex_target;
    std::optional<std::size_t> ex_count, ex_steps;
    ex_run->add_option("target", ex_target, "preset name or YAML config path")->required();
    ex_run->add_option("--count", ex_count, "override sampler.count");
    ex_run->add_option("--steps", ex_steps, "override sampler.steps");
    auto* ex_show = ex->add_subcommand("show", "print a preset's YAML");
    ex_show->add_option("target", ex_target, "preset name")->required();

    // verify
    auto* ver = app.add_subcommand("verify", "run oracle and invariant checks");
    std::string v_suite = "all", v_fault = "none";
    ver->add_option("--suite", v_suite, "oracles | invariants | all")->check(CLI::IsMember({"oracles", "invariants", "all"}));
    ver->add_option("--inject-fault", v_fault, "none | b-sign")->check(CLI::IsMember({"none", "b-sign"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    try {
        if (*sched_list) {
            std::printf("%-17s %-18s %-10s %-10s %s\n", "name", "gamma(t)", "valid", "regime", "slope");
            for (auto g : finterp::Schedule::all_gamma_families()) {
                const auto s = finterp::Schedule::builtin(g);
                const auto rep = finterp::validate_schedule(s);
                std::string regime = "n/a", slope = "";
                if (!s.gamma_is_zero()) {
                    const auto r = finterp::regime_limit(s);
                    regime = finterp::regime_name(r.regime);
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%+.3f", r.slope);
                    slope = buf;
                }
                std::string valid = rep.ok() ? "ok" : "fails";
                for (const auto& c : rep.checks)
                    if (!c.passed) valid += " " + c.name;
                std::printf("%-17s %-18s %-10s %-10s %s\n", std::string(finterp::Schedule::gamma_family_name(g)).c_str(),
                            std::string(finterp::Schedule::gamma_family_formula(g)).c_str(), valid.c_str(),
                            regime.c_str(), slope.c_str());
            }
            return 0;
        }
        if (*ds_gen) {
            const auto ts = finterp::uniform_toy(gen_n, gen_d, seed.value_or(0));
            finterp::save_csv(ts, gen_out);
            std::cout << "wrote " << ts.size() << " x " << ts.dim() << " points to " << gen_out << "\n";
            return 0;
        }
        if (*ds_val) {
            if (!fs::exists(val_path)) throw finterp::ValidationError("file not found: " + val_path);
            const auto ts = finterp::load_csv(val_path, val_skip);
            std::cout << "ok: n=" << ts.size() << " d=" << ts.dim() << " max_norm=" << finterp::format_real(ts.max_norm())
                      << "\n";
            return 0;
        }
        if (*feval) {
            const auto s = finterp::Schedule::from_name(schedule);
            const auto z = parse_list(z_text, "--z");
            const auto X = load_or_toy(train, skip_header, 5, z.size(), 7);
            json out;
            auto put = [&](const finterp::FieldValue& f) {
                out["value"] = f.value;
                out["weights"] = f.weights.w;
                out["argmax"] = f.weights.argmax;
            };
            if (which == "velocity") {
                put(finterp::velocity(z, t_val, X, s));
            } else if (which == "score") {
                put(finterp::score(z, t_val, X, s));
            } else if (which == "logdensity") {
                const auto w = finterp::log_weights(z, t_val, X, s);
                out["value"] = finterp::log_density(z, t_val, X, s);
                out["weights"] = w.w;
                out["argmax"] = w.argmax;
            } else {
                if (second.empty()) throw finterp::ValidationError("--which two-sided needs --second");
                const auto Y = load_or_toy(second, skip_header, 0, 0, 0);
                put(finterp::velocity_two_sided(z, t_val, X, Y, s));
            }
            std::cout << out.dump() << "\n";
            return 0;
        }
        if (*samp) {
            expcli::ExperimentConfig cfg;
            cfg.name = "sample";
            cfg.seed = seed.value_or(0);
            cfg.schedule = {schedule, s_zeta, s_zeta_scale};
            if (!train.empty()) {
                cfg.dataset.source = expcli::DatasetSpec::Source::csv;
                cfg.dataset.path = train;
                cfg.dataset.skip_header = skip_header;
            }
            cfg.sampler.mode = s_mode == "stochastic" ? expcli::RunMode::stochastic : expcli::RunMode::deterministic;
            cfg.sampler.steps = s_steps;
            cfg.sampler.t_end = s_t_end;
            cfg.sampler.count = s_count;
            cfg.sampler.trajectory_stride = s_traj.empty() ? 0 : std::max<std::size_t>(1, s_stride);
            if (!s_family.empty()) {
                expcli::ErrorSpec e;
                e.family = s_family;
                e.lambda = s_lambda;
                e.clip = s_clip;
                if (s_dir != "random") e.direction = parse_list(s_dir, "--error-direction");
                cfg.error_model = e;
            }
            cfg.validate();
            const auto X = cfg.dataset.build();
            const auto r = expcli::execute(cfg, X, nullptr, threads);
            fs::path out = s_out;
            if (!out_dir.empty() && out.is_relative()) {
                fs::create_directories(out_dir);
                out = fs::path(out_dir) / out;
            }
            expcli::write_endpoints_csv(out, r, X, nullptr);
            std::cout << "wrote " << r.samples.size() << " endpoints to " << out.string() << "\n";
            if (!s_traj.empty()) {
                fs::path tp = s_traj;
                if (!out_dir.empty() && tp.is_relative()) tp = fs::path(out_dir) / tp;
                expcli::write_trajectories_csv(tp, r);
                std::cout << "wrote trajectories to " << tp.string() << "\n";
            }
            return 0;
        }
        if (*an) {
            if (!fs::exists(train)) throw finterp::ValidationError("file not found: " + train);
            const auto X = finterp::load_csv(train, skip_header);
            std::vector<std::vector<double>> pts;
            std::vector<bool> div;
            read_samples(a_samples, pts, div);
            for (const auto& p : pts)
                if (p.size() != X.dim()) throw finterp::ValidationError("samples and training set differ in dimension");
            a_opt.r_div = a_rdiv;
            const auto rep = expcli::analyze_endpoints(pts, div, X, a_opt);
            std::ofstream out(a_report);
            if (!out) throw finterp::IoError("cannot write " + a_report);
            out << rep.dump(2) << "\n";
            std::cout << "count=" << rep["count"] << " memorized_fraction=" << rep["memorized_fraction"]
                      << " converged=" << rep["classes"]["converged"] << " vicinity=" << rep["classes"]["vicinity"]
                      << " diverged=" << rep["classes"]["diverged"] << " sigma2_hat=" << rep["sigma2_hat"] << "\n";
            return 0;
        }
        if (*ex_list) {
            for (const auto& p : expcli::presets()) std::printf("%-18s %s\n", p.name.c_str(), p.description.c_str());
            return 0;
        }
        if (*ex_show) {
            const auto* p = expcli::find_preset(ex_target);
            if (!p) throw finterp::ValidationError("unknown preset '" + ex_target + "'");
            std::cout << p->yaml;
            return 0;
        }
        if (*ex_run) {
            expcli::ExperimentConfig cfg;
            if (const auto* p = expcli::find_preset(ex_target))
                cfg = expcli::parse_config(p->yaml);
            else if (fs::exists(ex_target))
                cfg = expcli::load_config(ex_target);
            else
                throw finterp::ValidationError("'" + ex_target + "' is neither a preset nor a config file");
            if (seed) cfg.seed = *seed;
            if (ex_count) cfg.sampler.count = *ex_count;
            if (ex_steps) cfg.sampler.steps = *ex_steps;
            const fs::path dir = !out_dir.empty()          ? fs::path(out_dir)
                                 : !cfg.output_dir.empty() ? fs::path(cfg.output_dir)
                                                           : fs::path("runs") / cfg.name;
            const auto m = expcli::run_experiment(cfg, dir, threads);
            print_summary(m, dir);
            return 0;
        }
        if (*ver) {
            const auto suite = v_suite == "oracles"      ? expcli::Suite::oracles
                               : v_suite == "invariants" ? expcli::Suite::invariants
                                                         : expcli::Suite::all;
            const auto checks = expcli::run_verify(suite, v_fault == "b-sign" ? expcli::Fault::b_sign : expcli::Fault::none,
                                                   threads);
            return expcli::print_checks(std::cout, checks) ? 0 : exit_verify;
        }
    } catch (const finterp::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return 0;
}
