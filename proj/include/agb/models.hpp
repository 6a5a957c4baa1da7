#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agb/features.hpp"

namespace agb {

struct OlsModel {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    double intercept = 0.0;
    double loo_rmse = 0.0;

    double predict(std::span<const double> row) const;
    std::vector<double> predict(const FeatureTable& table) const;
};

// Least squares on the named columns plus an intercept. Throws NumericalError
// when the design is rank deficient.
OlsModel fit_ols_subset(const FeatureTable& table, const std::vector<std::string>& names);

// Exhaustive search over subsets of up to max_vars candidates (the empty,
// intercept-only subset included). The lowest leave-one-out RMSE wins; ties go
// to fewer variables, then to the earlier subset. Rank-deficient subsets are
// skipped and listed in `skipped`.
OlsModel fit_ols(const FeatureTable& table, const std::vector<std::string>& candidates, std::size_t max_vars = 3,
                 std::vector<std::vector<std::string>>* skipped = nullptr);

// Squared Pearson correlation; nullopt when either side is constant.
std::optional<double> r_squared(std::span<const double> predicted, std::span<const double> observed);

// k(u, v) = exp(-sigma * |u - v|^2)
double rbf_kernel(std::span<const double> u, std::span<const double> v, double sigma);

struct SvrOptions {
    double epsilon = 0.1;
    double tolerance = 1e-6;
    std::size_t max_iterations = 10'000'000;
};

// Solution of the epsilon-SVR dual on a precomputed kernel matrix:
// f(x_i) = sum_j beta_j K_ij + bias with -C <= beta_j <= C.
struct SvrDual {
    std::vector<double> beta;
    double bias = 0.0;
    double gap = 0.0;  // maximal violating-pair gap at termination
    std::size_t iterations = 0;
};

// Second-order working-set SMO over the 2n-variable formulation. Throws
// NumericalError when the iteration cap is hit before the gap closes.
SvrDual solve_svr_dual(const std::vector<std::vector<double>>& kernel, std::span<const double> y, double cost,
                       const SvrOptions& options = {});

struct SvrModel {
    std::vector<std::string> names;
    double sigma = 1.0;
    double cost = 1.0;
    double epsilon = 0.1;
    std::vector<double> feature_mean, feature_sd;
    double target_mean = 0.0, target_sd = 1.0;
    std::vector<std::vector<double>> support;  // standardized rows
    std::vector<double> beta;
    double bias = 0.0;

    std::vector<double> standardize(std::span<const double> row) const;
    // Decision value on the standardized target scale.
    double decision(std::span<const double> row) const;
    double predict(std::span<const double> row) const;
    std::vector<double> predict(const FeatureTable& table) const;
};

// Features and target are standardized with training means and standard
// deviations (a zero deviation is treated as 1).
SvrModel fit_svr(const FeatureTable& table, const std::vector<std::string>& names, double sigma, double cost,
                 const SvrOptions& options = {});

// Largest KKT violation over training rows on the standardized scale.
double svr_kkt_residual(const SvrModel& model, const FeatureTable& table);

struct Split {
    std::vector<std::size_t> train, test;
};

// Seeded shuffle; the first ceil(0.8 n) rows train. Needs n >= 5.
Split split_80_20(std::size_t n, std::uint64_t seed = 123);

struct CvScheme {
    std::uint64_t seed = 123;
    std::size_t repeats = 9;
};

inline const std::vector<double> kDefaultSigmaGrid{0.2, 0.25, 0.3, 0.5, 1.0, 2.0, 3.0};
inline const std::vector<double> kDefaultCostGrid{1.0, 2.0, 3.0, 4.0, 5.0};

struct GridCell {
    double sigma = 0.0;
    double cost = 0.0;
    double rmse = 0.0;
};

struct GridResult {
    double sigma = 0.0;
    double cost = 0.0;
    double rmse = 0.0;
    std::vector<GridCell> surface;  // cost-major, sigma-minor
};

// Mean validation RMSE over repeated seeded 80/20 splits for every (sigma, C).
// The lowest wins; ties go to smaller C, then smaller sigma.
GridResult grid_search(const FeatureTable& table, const std::vector<std::string>& names,
                       const std::vector<double>& sigma_grid, const std::vector<double>& cost_grid,
                       const CvScheme& scheme = {}, const SvrOptions& options = {});

CsvTable surface_to_csv(const GridResult& result);

enum class ModelKind { ols, svr };

struct FittedModel {
    ModelKind kind = ModelKind::svr;
    std::string target;
    OlsModel ols;
    SvrModel svr;

    const std::vector<std::string>& names() const { return kind == ModelKind::ols ? ols.names : svr.names; }
    std::vector<double> predict(const FeatureTable& table) const;
};

void write_model(const std::filesystem::path& path, const FittedModel& model);
FittedModel read_model(const std::filesystem::path& path);

}  // namespace agb
