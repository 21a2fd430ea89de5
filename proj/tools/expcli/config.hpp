#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "finterp/dataset.hpp"
#include "finterp/error_model.hpp"
#include "finterp/sampler.hpp"
#include "finterp/schedule.hpp"

namespace expcli {

struct ScheduleSpec {
    std::string kind = "sqrt";
    std::string zeta = "none";
    double zeta_scale = 0.0;

    finterp::Schedule build() const;
};

struct DatasetSpec {
    enum class Source { uniform_toy, csv, inline_points };
    Source source = Source::uniform_toy;
    std::size_t n = 5;
    std::size_t d = 2;
    std::uint64_t seed = 7;
    std::string path;
    bool skip_header = false;
    std::vector<std::vector<double>> points;

    /// Relative csv paths resolve against `base`.
    finterp::TrainingSet build(const std::filesystem::path& base = {}) const;
};

enum class RunMode { deterministic, stochastic, two_sided };

struct SamplerSpec {
    RunMode mode = RunMode::deterministic;
    std::size_t steps = finterp::SamplerConfig::default_steps;
    double t_end = finterp::SamplerConfig::default_t_end;
    std::size_t count = 100;
    bool record_trajectory = false;
    std::size_t trajectory_stride = 0;  // 0: no trajectories.csv
    std::string direction = "both";     // two-sided only: to_x | to_y | both
};

struct ErrorSpec {
    std::string family = "bounded";
    double lambda = 0.0;
    std::optional<std::vector<double>> direction;  // absent: random per step
    double clip = 1e12;

    finterp::ErrorModel build(std::uint64_t seed) const;
};

struct AnalysisSpec {
    double threshold = 1.0 / 3.0;
    double tol_conv = 1e-2;
    std::optional<double> r_div;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    std::string output_dir;
    ScheduleSpec schedule;
    DatasetSpec dataset;
    std::optional<DatasetSpec> second_dataset;
    SamplerSpec sampler;
    std::optional<ErrorSpec> error_model;
    AnalysisSpec analysis;
    std::filesystem::path base_dir;  // where relative csv paths resolve; not serialized

    finterp::SamplerConfig sampler_config() const;
    /// Cross-field checks that need no sampling: schedule validity, mode/section compatibility.
    void validate() const;
};

/// Parses the YAML grammar documented in the README; errors carry 1-based line numbers.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_yaml(c)) == c and equal configs give equal text.
std::string to_yaml(const ExperimentConfig& c);

std::uint64_t fnv1a64(const std::string& text);

struct Preset {
    std::string name;
    std::string description;
    std::string yaml;
};

const std::vector<Preset>& presets();
const Preset* find_preset(const std::string& name);

}  // namespace expcli
