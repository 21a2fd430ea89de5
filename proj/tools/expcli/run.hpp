#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "finterp/analysis.hpp"

namespace expcli {

inline constexpr const char* version = "0.1.0";

struct SampleRecord {
    std::size_t sample_id = 0;
    int target = 0;  // 0: first set, 1: second set (two-sided TO_Y)
    std::vector<double> endpoint;
    bool diverged = false;
    std::optional<bool> monotone;
    std::vector<double> times;   // thinned
    std::vector<double> states;  // thinned, row-major
    std::vector<double> eps_norms;
    std::vector<bool> clipped;
};

struct RunResult {
    std::vector<SampleRecord> samples;
    std::size_t dim = 0;
    bool has_error_model = false;
    bool two_sided = false;
};

/// Samples every trajectory of the experiment; thread count does not affect the result.
RunResult execute(const ExperimentConfig& cfg, const finterp::TrainingSet& X, const finterp::TrainingSet* Y,
                  unsigned threads);

/// report.json contents for endpoints against anchors X.
nlohmann::json analyze_endpoints(const std::vector<std::vector<double>>& endpoints, const std::vector<bool>& diverged,
                                 const finterp::TrainingSet& X, const AnalysisSpec& opt,
                                 const std::vector<std::optional<bool>>& monotone = {},
                                 const std::vector<std::size_t>& ids = {});

void write_endpoints_csv(const std::filesystem::path& path, const RunResult& r, const finterp::TrainingSet& X,
                         const finterp::TrainingSet* Y);
void write_trajectories_csv(const std::filesystem::path& path, const RunResult& r);

struct ScatterPoint {
    std::vector<double> z;
    finterp::EndpointKind kind = finterp::EndpointKind::vicinity;
};

/// Standalone SVG: anchors as squares, samples colour-coded by class, 5% margin; diverged points
/// are drawn on the frame with an annotation.
void emit_scatter(const std::vector<ScatterPoint>& points, const finterp::TrainingSet& anchors,
                  const std::filesystem::path& path, const finterp::TrainingSet* second = nullptr,
                  const std::string& title = {});

struct RunManifest {
    std::string config_hash;
    std::vector<std::string> files;
    double duration_seconds = 0.0;
    std::string version;
    nlohmann::json summary;
};

/// Full pipeline: validate, sample, write artefacts into `out_dir`, return the manifest.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, unsigned threads = 0);

}  // namespace expcli
