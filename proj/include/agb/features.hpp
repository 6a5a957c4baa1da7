#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agb/allometry.hpp"
#include "agb/discrete_metrics.hpp"

namespace agb {

// Rows are plots, columns are named metrics; column-major storage.
struct FeatureTable {
    std::vector<std::string> plot_ids;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::string target_name;
    std::vector<double> target;

    std::size_t rows() const { return plot_ids.size(); }
    std::size_t cols() const { return names.size(); }
    const std::vector<double>& column(std::string_view name) const;
    // Copy restricted to the given rows (order preserved as given).
    FeatureTable subset_rows(std::span<const std::size_t> rows) const;
    FeatureTable subset_columns(std::span<const std::string> keep) const;
};

// Joins metric vectors with inventory totals on plot_id. target is "AGBt" or
// "AGBm". Columns with any undefined cell are dropped and listed in
// `dropped_missing`. Throws DataError when fewer than two plots join.
FeatureTable assemble_features(const std::vector<MetricVector>& metrics, const std::vector<PlotTotals>& totals,
                               const std::string& target, std::vector<std::string>* dropped_missing = nullptr);

// plot_id, metric columns..., target column last.
CsvTable features_to_csv(const FeatureTable& table);
// Reads a table written by features_to_csv or a metrics CSV. The target column
// is optional (left empty when absent); columns with undefined cells are skipped.
FeatureTable features_from_csv(const CsvTable& csv, const std::string& target);

// Pearson r, nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

// Removes columns with sample variance below 1e-12. Throws DataError if none survive.
std::vector<std::string> drop_zero_variance(FeatureTable& table);

struct CorrelationDrop {
    std::string name;
    std::string kept;  // already-kept column it collides with
    double r = 0.0;
};

// Greedy filter in order of descending |r| with the target (ties by name): a
// column survives only if |r| < threshold against every column kept so far.
std::vector<CorrelationDrop> correlation_filter(FeatureTable& table, double threshold = 0.5);

// Min-max normalized R^2 of a univariate cubic fit of the target on each
// column (lower degree when rows are few). A single column scores 1.
std::vector<std::pair<std::string, double>> importance(const FeatureTable& table);

struct SelectRule {
    double threshold = 0.5;
    std::size_t fallback_k = 3;
    std::size_t min_vars = 2;
    std::size_t max_vars = 5;
};

struct Selection {
    std::vector<std::string> names;
    bool fallback_used = false;
    bool extended = false;
};

Selection select(std::vector<std::pair<std::string, double>> scores, const SelectRule& rule = {});

struct SelectionReport {
    std::string target;
    std::vector<std::string> dropped_missing;
    std::vector<std::string> dropped_zero_variance;
    std::vector<CorrelationDrop> dropped_correlated;
    std::vector<std::pair<std::string, double>> scores;
    std::vector<std::string> selected;
    bool fallback_used = false;
    bool extended = false;
};

struct SelectionOptions {
    double correlation_threshold = 0.5;
    SelectRule rule;
};

// Zero-variance filter, correlation filter, importance ranking and selection.
SelectionReport run_selection(FeatureTable table, const SelectionOptions& options = {});

std::string report_to_json(const SelectionReport& report);
SelectionReport report_from_json(const std::string& text);

}  // namespace agb
