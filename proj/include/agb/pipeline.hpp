#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agb/discrete_metrics.hpp"
#include "agb/evaluate.hpp"
#include "agb/features.hpp"
#include "agb/geometry.hpp"
#include "agb/models.hpp"
#include "agb/preprocess.hpp"
#include "agb/waveform.hpp"

namespace agb {

enum class Stage { ingest, preprocess, metrics, simulate, inventory, select, fit, predict, evaluate, report };

inline constexpr Stage kAllStages[] = {Stage::ingest,    Stage::preprocess, Stage::metrics, Stage::simulate,
                                       Stage::inventory, Stage::select,     Stage::fit,     Stage::predict,
                                       Stage::evaluate,  Stage::report};

std::string_view to_string(Stage stage);
// Throws ConfigError for an unknown name.
Stage parse_stage(std::string_view name);

struct SystemConfig {
    std::string name;  // ALS_D, ULS_D or SLS_FW
    SystemTag tag = SystemTag::als_d;
    std::vector<std::filesystem::path> clouds;
    double thin_density = 0.0;  // pulses per m2 kept per plot; 0 keeps all
    bool waveform() const { return tag == SystemTag::sls_fw; }
};

struct PipelineConfig {
    std::uint64_t seed = 123;
    unsigned threads = 0;
    std::filesystem::path output = "agb_output";
    std::vector<std::string> targets{"AGBt", "AGBm"};

    std::filesystem::path plots;
    std::filesystem::path inventory;
    std::optional<std::filesystem::path> wood_density;
    double default_wood_density = kDefaultWoodDensity;

    std::vector<SystemConfig> systems;

    bool remove_noise = true;
    NoiseFilterOptions noise;
    GroundFilterOptions ground;
    double height_floor = kDefaultHeightFloor;
    CloudMetricsOptions metrics;

    FootprintConfig footprint;
    double footprint_spacing = 0.0;  // 0: one footprint at the plot centroid

    SelectionOptions selection;

    std::vector<double> sigma_grid = kDefaultSigmaGrid;
    std::vector<double> cost_grid = kDefaultCostGrid;
    std::size_t repeats = 9;
    SvrOptions svr;
    std::size_t ols_max_vars = 3;

    // Throws ConfigError when an input path is missing or a value is invalid.
    void validate() const;
};

// INI file; relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

// Footprint centres: the centroid, or a grid at `spacing` clipped to the polygon.
std::vector<Vec2> footprint_centres(const Polygon& plot, double spacing);

// Plot areas in m2 from polygons.
std::map<std::string, double> plot_areas(const std::map<std::string, Polygon>& plots);

// Simulates each footprint of a plot and averages their metrics. Waveform
// dumps go to dump_dir when given.
MetricVector plot_waveform_metrics(const PointCloud& classified, const Polygon& plot, const std::string& plot_id,
                                   const FootprintConfig& base, double spacing,
                                   const std::optional<std::filesystem::path>& dump_dir);

struct SummaryRow {
    std::string system;
    std::string target;
    std::string model;
    std::string subset;  // all or test
    ErrorSummary errors;
};

struct PipelineResult {
    std::vector<SummaryRow> summary;
    Stage last_stage = Stage::report;
};

// Runs every stage in order, stopping after `stop_after` when given. Stage
// failures are rethrown with the stage name prefixed; artifacts written by
// earlier stages are kept.
PipelineResult run_pipeline(const PipelineConfig& config, std::optional<Stage> stop_after = std::nullopt);

CsvTable summary_to_csv(const std::vector<SummaryRow>& rows);

}  // namespace agb
