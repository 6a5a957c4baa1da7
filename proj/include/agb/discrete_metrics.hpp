#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agb/las_io.hpp"
#include "agb/table_io.hpp"

namespace agb {

enum class SystemTag { als_d, uls_d, sls_fw };

std::string_view to_string(SystemTag tag);
// Accepts "ALS_D", "ULS_D", "SLS_FW" (case-insensitive); throws ConfigError otherwise.
SystemTag parse_system(std::string_view text);

// Named plot features from one sensing system. Undefined values (for example a
// coefficient of variation of a zero-variance channel) are held as nullopt.
struct MetricVector {
    std::string plot_id;
    SystemTag system = SystemTag::als_d;
    std::vector<std::pair<std::string, std::optional<double>>> values;

    void add(std::string name, std::optional<double> value) { values.emplace_back(std::move(name), value); }
    std::optional<double> get(std::string_view name) const;
    bool has(std::string_view name) const;
};

inline constexpr std::array<double, 15> kPercentileLevels{1, 5, 10, 20, 25, 30, 40, 50, 60, 70, 75, 80, 90, 95, 99};

// Linear interpolation at rank p/100 * (n - 1) of the sorted values.
double percentile(std::span<const double> values, double p);
double percentile_sorted(std::span<const double> sorted, double p);

// Unbiased sample L-moments from probability-weighted moments. Moments of
// order r need at least r values; ratios need a non-zero L2.
struct LMoments {
    double l1 = 0.0;
    std::optional<double> l2, l3, l4, skewness, kurtosis;
};
LMoments l_moments(std::span<const double> values);

// Statistics of one channel, each name prefixed with `prefix` + ".". A
// positive mode_bin bins values at that width (mode reported at the bin
// centre); zero takes the mode of the raw values. Ties go to the smaller bin.
std::vector<std::pair<std::string, std::optional<double>>> channel_statistics(std::span<const double> values,
                                                                             std::string_view prefix,
                                                                             double mode_bin);

struct CloudMetricsOptions {
    double height_cutoff = 1.37;
    double mode_bin = 0.5;
};

// Metrics over points with normalized height >= height_cutoff. Throws
// DataError when fewer than two points qualify.
MetricVector cloud_metrics(const PointCloud& normalized, const std::string& plot_id, SystemTag system,
                           const CloudMetricsOptions& options = {});

// One row per vector: plot_id, system, then the union of metric names in
// first-seen order.
CsvTable metrics_to_csv(const std::vector<MetricVector>& rows);
std::vector<MetricVector> metrics_from_csv(const CsvTable& table);

}  // namespace agb
