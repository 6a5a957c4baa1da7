#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "agb/table_io.hpp"

namespace agb {

// All throw DataError on empty input or a length mismatch.
double mae(std::span<const double> predicted, std::span<const double> observed);
double rmse(std::span<const double> predicted, std::span<const double> observed);
// 100 |p - o| / o per plot; throws DataError on a non-positive observation.
std::vector<double> pct_errors(std::span<const double> predicted, std::span<const double> observed);
double mean_pct_error(std::span<const double> predicted, std::span<const double> observed);

struct ErrorSummary {
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double pct_error = 0.0;
    double accuracy = 0.0;  // 100 - mean percentage error
};

ErrorSummary summarize(std::span<const double> predicted, std::span<const double> observed);

struct TTest {
    double mean_difference = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Two-sided paired t-test on a - b. Identical samples give p = 1; a constant
// non-zero difference gives p = 0. Needs at least 3 pairs.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

inline double bonferroni(double p, std::size_t comparisons) {
    return std::min(1.0, p * static_cast<double>(comparisons));
}

struct PairComparison {
    std::string first, second;
    double difference = 0.0;  // mean of |err first| - |err second|
    double p_raw = 1.0;
    double p_adjusted = 1.0;
};

struct SystemErrors {
    std::string system;
    std::vector<double> abs_errors;  // paired by plot across systems
};

// Every unordered pair in input order; m = number of pairs.
std::vector<PairComparison> compare_models(const std::vector<SystemErrors>& systems);

// Square layout: differences above the diagonal, adjusted p below.
CsvTable comparison_matrix(const std::vector<SystemErrors>& systems, const std::vector<PairComparison>& pairs);
std::string comparison_text(const std::vector<SystemErrors>& systems, const std::vector<PairComparison>& pairs);

}  // namespace agb
