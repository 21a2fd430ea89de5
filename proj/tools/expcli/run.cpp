#include "run.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "finterp/parallel.hpp"

namespace expcli {

namespace fs = std::filesystem;
using finterp::format_real;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw finterp::IoError("cannot write " + p.string());
    return out;
}

void thin_into(const finterp::Trajectory& tr, std::size_t stride, SampleRecord& rec) {
    if (stride == 0 || !tr.recorded()) return;
    const std::size_t m = tr.recorded_states();
    for (std::size_t k = 0; k < m; ++k) {
        if (k % stride != 0 && k + 1 != m) continue;
        rec.times.push_back(tr.times[k]);
        auto z = tr.state(k);
        rec.states.insert(rec.states.end(), z.begin(), z.end());
        if (!tr.eps_norms.empty()) {
            // eps at state k drives the step k -> k+1; the final state has none
            rec.eps_norms.push_back(k < tr.eps_norms.size() ? tr.eps_norms[k] : 0.0);
            rec.clipped.push_back(k < tr.clipped.size() ? static_cast<bool>(tr.clipped[k]) : false);
        }
    }
}

}  // namespace

RunResult execute(const ExperimentConfig& cfg, const finterp::TrainingSet& X, const finterp::TrainingSet* Y,
                  unsigned threads) {
    const auto s = cfg.schedule.build();
    const auto sc = cfg.sampler_config();
    const std::size_t stride = cfg.sampler.trajectory_stride;
    RunResult r;
    r.dim = X.dim();
    r.has_error_model = cfg.error_model.has_value();
    r.two_sided = cfg.sampler.mode == RunMode::two_sided;

    if (r.two_sided) {
        if (!Y) throw finterp::ValidationError("two_sided mode needs a second dataset");
        std::vector<finterp::TwoSidedDirection> dirs;
        if (cfg.sampler.direction != "to_y") dirs.push_back(finterp::TwoSidedDirection::to_x);
        if (cfg.sampler.direction != "to_x") dirs.push_back(finterp::TwoSidedDirection::to_y);
        const std::size_t n = cfg.sampler.count;
        r.samples.resize(n * dirs.size());
        finterp::parallel_for(r.samples.size(), threads, [&](std::size_t j) {
            const auto dir = dirs[j / n];
            const std::size_t k = j % n;
            // start at a uniformly chosen anchor of the opposite set
            const auto& from = dir == finterp::TwoSidedDirection::to_x ? *Y : X;
            finterp::RandomStream rng(finterp::substream_key(finterp::substream_key(cfg.seed, 0x7473 + j / n), k));
            const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(from.size()));
            auto tr = finterp::sample_two_sided(sc, X, *Y, s, dir, from.point(std::min(idx, from.size() - 1)), k);
            auto& rec = r.samples[j];
            rec.sample_id = k;
            rec.target = dir == finterp::TwoSidedDirection::to_x ? 0 : 1;
            rec.endpoint = tr.endpoint;
            rec.diverged = tr.diverged;
            thin_into(tr, stride, rec);
        });
        return r;
    }

    std::optional<finterp::ErrorModel> model;
    if (cfg.error_model) model = cfg.error_model->build(cfg.seed);
    r.samples.resize(cfg.sampler.count);
    finterp::parallel_for(r.samples.size(), threads, [&](std::size_t k) {
        finterp::Trajectory tr;
        if (model)
            tr = finterp::sample_with_error(sc, *model, X, s, std::nullopt, k);
        else if (cfg.sampler.mode == RunMode::stochastic)
            tr = finterp::sample_stochastic(sc, X, s, std::nullopt, k);
        else
            tr = finterp::sample_deterministic(sc, X, s, std::nullopt, k);
        auto& rec = r.samples[k];
        rec.sample_id = k;
        rec.endpoint = tr.endpoint;
        rec.diverged = tr.diverged;
        if (tr.recorded()) rec.monotone = finterp::monotone_divergence(tr, X);
        thin_into(tr, stride, rec);
    });
    return r;
}

json analyze_endpoints(const std::vector<std::vector<double>>& endpoints, const std::vector<bool>& diverged,
                       const finterp::TrainingSet& X, const AnalysisSpec& opt,
                       const std::vector<std::optional<bool>>& monotone, const std::vector<std::size_t>& ids) {
    json rep;
    rep["count"] = endpoints.size();
    rep["threshold"] = opt.threshold;
    finterp::ClassifyOptions co{opt.tol_conv, opt.r_div};
    std::vector<finterp::EndpointClass> classes;
    for (std::size_t i = 0; i < endpoints.size(); ++i)
        classes.push_back(finterp::classify_endpoint(endpoints[i], i < diverged.size() && diverged[i], X, co));
    const auto counts = finterp::count_classes(classes);
    rep["classes"] = {{"converged", counts.converged}, {"vicinity", counts.vicinity}, {"diverged", counts.diverged}};
    rep["tol_conv"] = opt.tol_conv;
    rep["r_div"] = opt.r_div.value_or(finterp::default_divergence_radius(X));

    std::optional<finterp::MemorizationReport> mem;
    if (X.size() >= 2 && !endpoints.empty()) mem = finterp::memorization_test(endpoints, X, opt.threshold);
    rep["memorized_fraction"] = mem ? json(mem->memorized_fraction) : json(nullptr);

    std::vector<std::vector<double>> finite;
    for (std::size_t i = 0; i < endpoints.size(); ++i)
        if (classes[i].kind != finterp::EndpointKind::diverged) finite.push_back(endpoints[i]);
    if (finite.size() >= 30) {
        const auto fit = finterp::residual_variance(finite, X);
        rep["sigma2_hat"] = fit.sigma2;
        rep["residual_mean"] = fit.mean;
    } else {
        rep["sigma2_hat"] = nullptr;
    }
    std::size_t mono_known = 0, mono_true = 0;
    for (const auto& m : monotone)
        if (m) {
            ++mono_known;
            mono_true += *m ? 1 : 0;
        }
    if (mono_known > 0) rep["monotone_divergence"] = {{"recorded", mono_known}, {"true", mono_true}};

    json per = json::array();
    for (std::size_t i = 0; i < endpoints.size(); ++i) {
        const auto nn = finterp::nearest_neighbor(endpoints[i], X);
        json e{{"sample_id", i < ids.size() ? ids[i] : i},
               {"class", finterp::endpoint_kind_name(classes[i].kind)},
               {"nearest_idx", nn.index1},
               {"nearest_dist", nn.d1}};
        if (mem) {
            e["ratio"] = nn.d2_sq > 0.0 ? nn.d1_sq / nn.d2_sq : 0.0;
            e["memorized"] = static_cast<bool>(mem->memorized[i]);
        }
        if (i < monotone.size() && monotone[i]) e["monotone_divergence"] = *monotone[i];
        per.push_back(std::move(e));
    }
    rep["per_sample"] = std::move(per);
    return rep;
}

void write_endpoints_csv(const fs::path& path, const RunResult& r, const finterp::TrainingSet& X,
                         const finterp::TrainingSet* Y) {
    auto out = open_out(path);
    out << "sample_id";
    for (std::size_t k = 0; k < r.dim; ++k) out << ",z_" << k;
    out << ",nearest_idx,nearest_dist,diverged";
    if (r.two_sided) out << ",target";
    out << "\n";
    for (const auto& s : r.samples) {
        const auto& anchors = s.target == 1 && Y ? *Y : X;
        const auto nn = finterp::nearest_neighbor(s.endpoint, anchors);
        out << s.sample_id;
        for (double x : s.endpoint) out << ',' << format_real(x);
        out << ',' << nn.index1 << ',' << format_real(nn.d1) << ',' << (s.diverged ? 1 : 0);
        if (r.two_sided) out << ',' << (s.target == 1 ? "Y" : "X");
        out << "\n";
    }
}

void write_trajectories_csv(const fs::path& path, const RunResult& r) {
    auto out = open_out(path);
    out << "sample_id";
    if (r.two_sided) out << ",target";
    out << ",t";
    for (std::size_t k = 0; k < r.dim; ++k) out << ",z_" << k;
    if (r.has_error_model) out << ",eps_norm,clipped";
    out << "\n";
    for (const auto& s : r.samples) {
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            out << s.sample_id;
            if (r.two_sided) out << ',' << (s.target == 1 ? "Y" : "X");
            out << ',' << format_real(s.times[i]);
            for (std::size_t k = 0; k < r.dim; ++k) out << ',' << format_real(s.states[i * r.dim + k]);
            if (r.has_error_model) out << ',' << format_real(s.eps_norms[i]) << ',' << (s.clipped[i] ? 1 : 0);
            out << "\n";
        }
    }
}

void emit_scatter(const std::vector<ScatterPoint>& points, const finterp::TrainingSet& anchors, const fs::path& path,
                  const finterp::TrainingSet* second, const std::string& title) {
    if (anchors.dim() != 2 || (second && second->dim() != 2))
        throw finterp::NotApplicableError("emit_scatter: only 2-dimensional data can be plotted");
    for (const auto& p : points)
        if (p.z.size() != 2) throw finterp::NotApplicableError("emit_scatter: only 2-dimensional data can be plotted");

    double lo[2] = {INFINITY, INFINITY}, hi[2] = {-INFINITY, -INFINITY};
    auto grow = [&](std::span<const double> z) {
        for (int k = 0; k < 2; ++k) {
            lo[k] = std::min(lo[k], z[k]);
            hi[k] = std::max(hi[k], z[k]);
        }
    };
    for (std::size_t i = 0; i < anchors.size(); ++i) grow(anchors.point(i));
    if (second)
        for (std::size_t i = 0; i < second->size(); ++i) grow(second->point(i));
    std::size_t n_div = 0;
    for (const auto& p : points) {
        if (p.kind == finterp::EndpointKind::diverged || !std::isfinite(p.z[0]) || !std::isfinite(p.z[1])) {
            ++n_div;
            continue;
        }
        grow(p.z);
    }
    for (int k = 0; k < 2; ++k) {
        double span = hi[k] - lo[k];
        if (!(span > 0.0)) span = 1.0;
        const double pad = 0.05 * span;
        lo[k] -= pad;
        hi[k] += pad;
        if (hi[k] - lo[k] < 1e-12) hi[k] = lo[k] + 1.0;
    }
    constexpr double W = 480, H = 480, M = 40;
    auto px = [&](double x) { return M + (x - lo[0]) / (hi[0] - lo[0]) * (W - 2 * M); };
    auto py = [&](double y) { return H - M - (y - lo[1]) / (hi[1] - lo[1]) * (H - 2 * M); };
    auto clampf = [](double v, double a, double b) { return std::isfinite(v) ? std::clamp(v, a, b) : (v > 0 ? b : a); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto lab = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return std::string(buf);
    };

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\"" << H - 2 * M
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    if (!title.empty()) out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    out << "<text x=\"" << M << "\" y=\"" << H - 12 << "\" font-size=\"10\">" << lab(lo[0]) << "</text>\n";
    out << "<text x=\"" << W - M << "\" y=\"" << H - 12 << "\" font-size=\"10\" text-anchor=\"end\">" << lab(hi[0]) << "</text>\n";
    out << "<text x=\"4\" y=\"" << H - M << "\" font-size=\"10\">" << lab(lo[1]) << "</text>\n";
    out << "<text x=\"4\" y=\"" << M + 10 << "\" font-size=\"10\">" << lab(hi[1]) << "</text>\n";

    out << "<g id=\"samples\">\n";
    for (const auto& p : points) {
        const char* colour = p.kind == finterp::EndpointKind::converged  ? "#2a9d3a"
                             : p.kind == finterp::EndpointKind::vicinity ? "#e08a00"
                                                                         : "#d62828";
        const double x = clampf(px(p.z[0]), M, W - M), y = clampf(py(p.z[1]), M, H - M);
        out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2\" fill=\"" << colour
            << "\" fill-opacity=\"0.6\"/>\n";
    }
    out << "</g>\n<g id=\"anchors\">\n";
    auto squares = [&](const finterp::TrainingSet& set, const char* colour) {
        for (std::size_t i = 0; i < set.size(); ++i) {
            auto z = set.point(i);
            out << "<rect x=\"" << num(px(z[0]) - 4) << "\" y=\"" << num(py(z[1]) - 4)
                << "\" width=\"8\" height=\"8\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        }
    };
    squares(anchors, "#1d4ed8");
    if (second) squares(*second, "#7c3aed");
    out << "</g>\n";
    if (n_div > 0)
        out << "<text x=\"" << W - M << "\" y=\"" << M - 8 << "\" text-anchor=\"end\" font-size=\"11\" fill=\"#d62828\">"
            << n_div << " diverged point(s) clipped to frame</text>\n";
    out << "</svg>\n";
}

RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir, unsigned threads) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    const auto X = cfg.dataset.build(cfg.base_dir);
    std::optional<finterp::TrainingSet> Y;
    if (cfg.second_dataset) {
        Y = cfg.second_dataset->build(cfg.base_dir);
        if (Y->dim() != X.dim()) throw finterp::ValidationError("second_dataset dimension differs from dataset");
    }
    if (cfg.error_model && cfg.error_model->direction && cfg.error_model->direction->size() != X.dim())
        throw finterp::ValidationError("error_model.direction has the wrong dimension");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw finterp::IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    const auto result = execute(cfg, X, Y ? &*Y : nullptr, threads);
    RunManifest man;
    man.version = version;
    const auto canonical = to_yaml(cfg);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
    man.config_hash = hash;

    write_endpoints_csv(out_dir / "endpoints.csv", result, X, Y ? &*Y : nullptr);
    man.files.push_back("endpoints.csv");
    if (cfg.sampler.trajectory_stride > 0) {
        write_trajectories_csv(out_dir / "trajectories.csv", result);
        man.files.push_back("trajectories.csv");
    }

    json report;
    std::vector<ScatterPoint> scatter;
    auto analyze_target = [&](int target, const finterp::TrainingSet& anchors) {
        std::vector<std::vector<double>> ends;
        std::vector<bool> div;
        std::vector<std::optional<bool>> mono;
        std::vector<std::size_t> ids;
        for (const auto& s : result.samples) {
            if (s.target != target) continue;
            ends.push_back(s.endpoint);
            div.push_back(s.diverged);
            mono.push_back(s.monotone);
            ids.push_back(s.sample_id);
        }
        auto rep = analyze_endpoints(ends, div, anchors, cfg.analysis, mono, ids);
        if (anchors.dim() == 2) {
            finterp::ClassifyOptions co{cfg.analysis.tol_conv, cfg.analysis.r_div};
            for (std::size_t i = 0; i < ends.size(); ++i)
                scatter.push_back({ends[i], finterp::classify_endpoint(ends[i], div[i], anchors, co).kind});
        }
        return rep;
    };
    if (result.two_sided) {
        json by;
        std::size_t total = 0, conv = 0, vic = 0, dv = 0;
        double mem_hits = 0.0;
        for (int target : {0, 1}) {
            const bool present = std::any_of(result.samples.begin(), result.samples.end(),
                                             [&](const SampleRecord& s) { return s.target == target; });
            if (!present) continue;
            auto rep = analyze_target(target, target == 0 ? X : *Y);
            const std::size_t c = rep["count"];
            total += c;
            conv += rep["classes"]["converged"].get<std::size_t>();
            vic += rep["classes"]["vicinity"].get<std::size_t>();
            dv += rep["classes"]["diverged"].get<std::size_t>();
            if (!rep["memorized_fraction"].is_null()) mem_hits += rep["memorized_fraction"].get<double>() * static_cast<double>(c);
            by[target == 0 ? "to_x" : "to_y"] = std::move(rep);
        }
        report["count"] = total;
        report["threshold"] = cfg.analysis.threshold;
        report["classes"] = {{"converged", conv}, {"vicinity", vic}, {"diverged", dv}};
        report["memorized_fraction"] = total ? mem_hits / static_cast<double>(total) : 0.0;
        report["sigma2_hat"] = nullptr;
        report["by_direction"] = std::move(by);
        report["per_sample"] = json::array();
        for (const char* k : {"to_x", "to_y"})
            if (report["by_direction"].contains(k))
                for (auto e : report["by_direction"][k]["per_sample"]) {
                    e["target"] = std::string(k) == "to_x" ? "X" : "Y";
                    report["per_sample"].push_back(e);
                }
    } else {
        report = analyze_target(0, X);
    }
    report["name"] = cfg.name;
    if (cfg.error_model && cfg.error_model->family == "gamma_scaled") {
        const auto pred = finterp::regime_report(cfg.error_model->build(cfg.seed), cfg.schedule.build());
        report["predicted_regime"] = finterp::regime_name(pred.regime);
        report["predicted_outcome"] = pred.outcome;
        report["regime_slope"] = pred.slope;
    }
    {
        auto out = open_out(out_dir / "report.json");
        out << report.dump(2) << "\n";
    }
    man.files.push_back("report.json");

    if (X.dim() == 2) {
        emit_scatter(scatter, X, out_dir / "scatter.svg", Y ? &*Y : nullptr, cfg.name);
        man.files.push_back("scatter.svg");
    }
    {
        auto out = open_out(out_dir / "config.yaml");
        out << canonical;
    }
    man.files.push_back("config.yaml");
    man.files.push_back("manifest.json");

    man.summary = report;
    man.summary.erase("per_sample");
    if (man.summary.contains("by_direction"))
        for (auto& [k, v] : man.summary["by_direction"].items()) v.erase("per_sample");
    man.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json mj{{"config_hash", man.config_hash},
            {"files", man.files},
            {"duration_seconds", man.duration_seconds},
            {"version", man.version},
            {"summary", man.summary}};
    auto out = open_out(out_dir / "manifest.json");
    out << mj.dump(2) << "\n";
    return man;
}

}  // namespace expcli
