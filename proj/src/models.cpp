#include "agb/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "agb/error.hpp"
#include "agb/parallel.hpp"
#include "agb/random.hpp"

namespace agb {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> row_of(const std::vector<const std::vector<double>*>& columns, std::size_t r) {
    std::vector<double> row(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) row[c] = (*columns[c])[r];
    return row;
}

std::vector<const std::vector<double>*> gather(const FeatureTable& table, const std::vector<std::string>& names) {
    std::vector<const std::vector<double>*> cols;
    for (const auto& n : names) cols.push_back(&table.column(n));
    return cols;
}

struct SubsetFit {
    OlsModel model;
    bool ok = false;
};

SubsetFit fit_subset(const FeatureTable& table, const std::vector<std::string>& names) {
    const auto n = static_cast<Eigen::Index>(table.rows());
    const auto p = static_cast<Eigen::Index>(names.size()) + 1;
    SubsetFit out;
    if (n <= p) return out;
    const auto cols = gather(table, names);
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        for (Eigen::Index c = 1; c < p; ++c) x(i, c) = (*cols[static_cast<std::size_t>(c - 1)])[static_cast<std::size_t>(i)];
        y(i) = table.target[static_cast<std::size_t>(i)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) return out;
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - x * beta;

    // Leverages from the thin Q factor.
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = q.row(i).squaredNorm();
        if (h >= 1.0 - 1e-12) return out;
        const double e = resid(i) / (1.0 - h);
        ss += e * e;
    }
    out.model.names = names;
    out.model.intercept = beta(0);
    for (Eigen::Index c = 1; c < p; ++c) out.model.coefficients.push_back(beta(c));
    out.model.loo_rmse = std::sqrt(ss / static_cast<double>(n));
    out.ok = true;
    return out;
}

void combinations(std::size_t n, std::size_t k, std::vector<std::size_t>& current, std::size_t start,
                  std::vector<std::vector<std::size_t>>& out) {
    if (current.size() == k) {
        out.push_back(current);
        return;
    }
    for (std::size_t i = start; i < n; ++i) {
        current.push_back(i);
        combinations(n, k, current, i + 1, out);
        current.pop_back();
    }
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double rmse_of(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(ss / static_cast<double>(a.size()));
}

}  // namespace

double OlsModel::predict(std::span<const double> row) const {
    double y = intercept;
    for (std::size_t c = 0; c < coefficients.size(); ++c) y += coefficients[c] * row[c];
    return y;
}

std::vector<double> OlsModel::predict(const FeatureTable& table) const {
    const auto cols = gather(table, names);
    std::vector<double> out(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) out[r] = predict(row_of(cols, r));
    return out;
}

OlsModel fit_ols_subset(const FeatureTable& table, const std::vector<std::string>& names) {
    auto fit = fit_subset(table, names);
    if (!fit.ok) throw NumericalError("OLS design is rank deficient or has too few rows");
    return fit.model;
}

OlsModel fit_ols(const FeatureTable& table, const std::vector<std::string>& candidates, std::size_t max_vars,
                 std::vector<std::vector<std::string>>* skipped) {
    const double scale = sd_of(table.target, mean_of(table.target));
    std::optional<OlsModel> best;
    for (std::size_t k = 0; k <= std::min(max_vars, candidates.size()); ++k) {
        std::vector<std::vector<std::size_t>> subsets;
        std::vector<std::size_t> current;
        combinations(candidates.size(), k, current, 0, subsets);
        for (const auto& subset : subsets) {
            std::vector<std::string> names;
            for (auto i : subset) names.push_back(candidates[i]);
            auto fit = fit_subset(table, names);
            if (!fit.ok) {
                if (skipped) skipped->push_back(names);
                continue;
            }
            // A larger subset must beat the incumbent by more than rounding noise.
            if (!best || fit.model.loo_rmse < best->loo_rmse * (1.0 - 1e-9) - 1e-12 * scale) best = fit.model;
        }
    }
    if (!best) throw NumericalError("no OLS subset could be fitted");
    return *best;
}

std::optional<double> r_squared(std::span<const double> predicted, std::span<const double> observed) {
    const auto r = pearson(predicted, observed);
    if (!r) return std::nullopt;
    return *r * *r;
}

double rbf_kernel(std::span<const double> u, std::span<const double> v, double sigma) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
    return std::exp(-sigma * d2);
}

SvrDual solve_svr_dual(const std::vector<std::vector<double>>& kernel, std::span<const double> z, double cost,
                       const SvrOptions& options) {
    const std::size_t n = z.size();
    if (n == 0 || kernel.size() != n) throw DataError("SVR needs a square kernel matching the targets");
    if (!(cost > 0.0)) throw ConfigError("SVR cost must be positive");
    const std::size_t m = 2 * n;
    auto sign = [&](std::size_t t) { return t < n ? 1.0 : -1.0; };
    auto k = [&](std::size_t s, std::size_t t) { return kernel[s % n][t % n]; };
    auto q = [&](std::size_t s, std::size_t t) { return sign(s) * sign(t) * k(s, t); };

    std::vector<double> alpha(m, 0.0), grad(m);
    for (std::size_t t = 0; t < m; ++t) grad[t] = t < n ? options.epsilon - z[t] : options.epsilon + z[t - n];
    auto upper = [&](std::size_t t) { return alpha[t] >= cost; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
    auto in_up = [&](std::size_t t) { return sign(t) > 0 ? !upper(t) : !lower(t); };
    auto in_low = [&](std::size_t t) { return sign(t) > 0 ? !lower(t) : !upper(t); };
    constexpr double tau = 1e-12;

    SvrDual out;
    std::size_t iter = 0;
    for (;; ++iter) {
        if (iter >= options.max_iterations) {
            throw NumericalError("SVR solver did not converge within " + std::to_string(options.max_iterations) +
                                 " iterations");
        }
        double gmax = -kInf, gmax2 = -kInf;
        std::optional<std::size_t> i;
        for (std::size_t t = 0; t < m; ++t) {
            if (in_up(t) && -sign(t) * grad[t] >= gmax) {
                gmax = -sign(t) * grad[t];
                i = t;
            }
        }
        std::optional<std::size_t> j;
        double best = kInf;
        for (std::size_t t = 0; t < m; ++t) {
            if (!in_low(t)) continue;
            gmax2 = std::max(gmax2, sign(t) * grad[t]);
            if (!i) continue;
            const double b = gmax + sign(t) * grad[t];
            if (b > 0.0) {
                double a = k(*i, *i) + k(t, t) - 2.0 * k(*i, t);
                if (a <= 0.0) a = tau;
                const double obj = -(b * b) / a;
                if (obj <= best) {
                    best = obj;
                    j = t;
                }
            }
        }
        out.gap = gmax + gmax2;
        if (!i || !j || out.gap < options.tolerance) break;

        const std::size_t a = *i, b = *j;
        const double old_a = alpha[a], old_b = alpha[b];
        const double qab = q(a, b);
        if (sign(a) != sign(b)) {
            double quad = k(a, a) + k(b, b) + 2.0 * qab;
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad[a] - grad[b]) / quad;
            const double diff = alpha[a] - alpha[b];
            alpha[a] += delta;
            alpha[b] += delta;
            if (diff > 0.0) {
                if (alpha[b] < 0.0) {
                    alpha[b] = 0.0;
                    alpha[a] = diff;
                }
            } else if (alpha[a] < 0.0) {
                alpha[a] = 0.0;
                alpha[b] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[a] > cost) {
                    alpha[a] = cost;
                    alpha[b] = cost - diff;
                }
            } else if (alpha[b] > cost) {
                alpha[b] = cost;
                alpha[a] = cost + diff;
            }
        } else {
            double quad = k(a, a) + k(b, b) - 2.0 * qab;
            if (quad <= 0.0) quad = tau;
            const double delta = (grad[a] - grad[b]) / quad;
            const double sum = alpha[a] + alpha[b];
            alpha[a] -= delta;
            alpha[b] += delta;
            if (sum > cost) {
                if (alpha[a] > cost) {
                    alpha[a] = cost;
                    alpha[b] = sum - cost;
                }
            } else if (alpha[b] < 0.0) {
                alpha[b] = 0.0;
                alpha[a] = sum;
            }
            if (sum > cost) {
                if (alpha[b] > cost) {
                    alpha[b] = cost;
                    alpha[a] = sum - cost;
                }
            } else if (alpha[a] < 0.0) {
                alpha[a] = 0.0;
                alpha[b] = sum;
            }
        }
        const double da = alpha[a] - old_a, db = alpha[b] - old_b;
        for (std::size_t t = 0; t < m; ++t) grad[t] += q(t, a) * da + q(t, b) * db;
    }
    out.iterations = iter;

    // Bias: average over free variables, else the midpoint of the feasible interval.
    double ub = kInf, lb = -kInf, free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < m; ++t) {
        const double yg = sign(t) * grad[t];
        if (upper(t)) {
            if (sign(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (sign(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            free_sum += yg;
            ++free_count;
        }
    }
    const double rho = free_count ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
    out.bias = -rho;
    out.beta.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.beta[t] = alpha[t] - alpha[t + n];
    return out;
}

std::vector<double> SvrModel::standardize(std::span<const double> row) const {
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - feature_mean[c]) / feature_sd[c];
    return out;
}

double SvrModel::decision(std::span<const double> row) const {
    const auto x = standardize(row);
    double f = bias;
    for (std::size_t s = 0; s < support.size(); ++s) f += beta[s] * rbf_kernel(support[s], x, sigma);
    return f;
}

double SvrModel::predict(std::span<const double> row) const { return target_mean + target_sd * decision(row); }

std::vector<double> SvrModel::predict(const FeatureTable& table) const {
    const auto cols = gather(table, names);
    std::vector<double> out(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) out[r] = predict(row_of(cols, r));
    return out;
}

SvrModel fit_svr(const FeatureTable& table, const std::vector<std::string>& names, double sigma, double cost,
                 const SvrOptions& options) {
    if (table.rows() < 3) throw DataError("SVR needs at least 3 training rows");
    if (!(sigma > 0.0) || !(cost > 0.0)) throw ConfigError("SVR sigma and cost must be positive");
    SvrModel model;
    model.names = names;
    model.sigma = sigma;
    model.cost = cost;
    model.epsilon = options.epsilon;
    const auto cols = gather(table, names);
    for (const auto* col : cols) {
        const double mean = mean_of(*col);
        const double sd = sd_of(*col, mean);
        model.feature_mean.push_back(mean);
        model.feature_sd.push_back(sd > 0.0 ? sd : 1.0);
    }
    model.target_mean = mean_of(table.target);
    const double tsd = sd_of(table.target, model.target_mean);
    model.target_sd = tsd > 0.0 ? tsd : 1.0;

    const std::size_t n = table.rows();
    std::vector<std::vector<double>> x(n);
    std::vector<double> z(n);
    for (std::size_t r = 0; r < n; ++r) {
        x[r] = model.standardize(row_of(cols, r));
        z[r] = (table.target[r] - model.target_mean) / model.target_sd;
    }
    std::vector<std::vector<double>> kernel(n, std::vector<double>(n));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) kernel[a][b] = kernel[b][a] = rbf_kernel(x[a], x[b], sigma);
    }
    const SvrDual dual = solve_svr_dual(kernel, z, cost, options);
    model.bias = dual.bias;
    for (std::size_t r = 0; r < n; ++r) {
        if (dual.beta[r] != 0.0) {
            model.support.push_back(x[r]);
            model.beta.push_back(dual.beta[r]);
        }
    }
    return model;
}

double svr_kkt_residual(const SvrModel& model, const FeatureTable& table) {
    const auto cols = gather(table, model.names);
    double worst = 0.0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto row = row_of(cols, r);
        const double z = (table.target[r] - model.target_mean) / model.target_sd;
        const double resid = z - model.decision(row);
        // Dual coefficient of this row (support rows are matched by position).
        const auto x = model.standardize(row);
        double beta = 0.0;
        for (std::size_t s = 0; s < model.support.size(); ++s) {
            if (model.support[s] == x) beta += model.beta[s];
        }
        const double a = std::abs(beta);
        const double outside = std::abs(resid) - model.epsilon;
        double violation = 0.0;
        if (a <= 0.0) {
            violation = std::max(0.0, outside);
        } else if (a >= model.cost) {
            violation = std::max(0.0, -outside);
            if (resid * beta < 0.0) violation = std::max(violation, std::abs(resid) + model.epsilon);
        } else {
            violation = std::abs(outside);
            if (resid * beta < 0.0) violation = std::max(violation, std::abs(resid) + model.epsilon);
        }
        worst = std::max(worst, violation);
    }
    return worst;
}

Split split_80_20(std::size_t n, std::uint64_t seed) {
    if (n < 5) throw DataError("an 80/20 split needs at least 5 rows, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    const auto train = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n) - 1e-9));
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train), order.end());
    return s;
}

GridResult grid_search(const FeatureTable& table, const std::vector<std::string>& names,
                       const std::vector<double>& sigma_grid, const std::vector<double>& cost_grid,
                       const CvScheme& scheme, const SvrOptions& options) {
    if (sigma_grid.empty() || cost_grid.empty()) throw ConfigError("grid search needs non-empty sigma and cost grids");
    if (scheme.repeats == 0) throw ConfigError("grid search needs at least one repeat");
    std::vector<Split> splits;
    for (std::size_t r = 0; r < scheme.repeats; ++r) splits.push_back(split_80_20(table.rows(), derive_seed(scheme.seed, r)));
    std::vector<FeatureTable> train, test;
    for (const auto& s : splits) {
        train.push_back(table.subset_rows(s.train));
        test.push_back(table.subset_rows(s.test));
        if (train.back().rows() < 3) throw DataError("grid search repeat has fewer than 3 training rows");
    }

    GridResult result;
    for (double c : cost_grid) {
        for (double s : sigma_grid) result.surface.push_back({s, c, 0.0});
    }
    parallel_for(result.surface.size(), [&](std::size_t cell) {
        auto& g = result.surface[cell];
        double sum = 0.0;
        for (std::size_t r = 0; r < splits.size(); ++r) {
            const auto model = fit_svr(train[r], names, g.sigma, g.cost, options);
            sum += rmse_of(model.predict(test[r]), test[r].target);
        }
        g.rmse = sum / static_cast<double>(splits.size());
    });

    std::vector<const GridCell*> order;
    for (const auto& g : result.surface) order.push_back(&g);
    std::stable_sort(order.begin(), order.end(), [](const GridCell* a, const GridCell* b) {
        if (a->cost != b->cost) return a->cost < b->cost;
        return a->sigma < b->sigma;
    });
    const GridCell* best = nullptr;
    for (const auto* g : order) {
        if (!best || g->rmse < best->rmse) best = g;
    }
    result.sigma = best->sigma;
    result.cost = best->cost;
    result.rmse = best->rmse;
    return result;
}

CsvTable surface_to_csv(const GridResult& result) {
    CsvTable csv;
    csv.header = {"sigma", "cost", "rmse", "best"};
    for (const auto& g : result.surface) {
        const bool best = g.sigma == result.sigma && g.cost == result.cost;
        csv.rows.push_back({format_number(g.sigma), format_number(g.cost), format_number(g.rmse), best ? "1" : "0"});
    }
    return csv;
}

std::vector<double> FittedModel::predict(const FeatureTable& table) const {
    return kind == ModelKind::ols ? ols.predict(table) : svr.predict(table);
}

namespace {

std::string join(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += format_number(values[i]);
    }
    return out;
}

std::string join(std::span<const std::string> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += values[i];
    }
    return out;
}

class ModelReader {
public:
    explicit ModelReader(const std::filesystem::path& path) : path_(path), in_(path) {
        if (!in_) throw ConfigError("cannot open model file " + path.string());
    }

    std::vector<std::string> line(const std::string& key) {
        std::string text;
        while (std::getline(in_, text)) {
            text = trim(text);
            if (!text.empty()) break;
        }
        std::istringstream ss(text);
        std::string word;
        ss >> word;
        if (word != key) throw DataError(path_.string() + ": expected '" + key + "', found '" + word + "'");
        std::vector<std::string> out;
        while (ss >> word) out.push_back(word);
        return out;
    }

    std::vector<double> numbers(const std::string& key, std::optional<std::size_t> count = std::nullopt) {
        std::vector<double> out;
        for (const auto& w : line(key)) out.push_back(parse_required(w, key));
        if (count && out.size() != *count) throw DataError(path_.string() + ": wrong value count for '" + key + "'");
        return out;
    }

    double number(const std::string& key) { return numbers(key, 1)[0]; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace

void write_model(const std::filesystem::path& path, const FittedModel& model) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file " + path.string());
    out << "model " << (model.kind == ModelKind::ols ? "ols" : "svr") << '\n'
        << "target " << model.target << '\n'
        << "variables " << join(std::span<const std::string>(model.names())) << '\n';
    if (model.kind == ModelKind::ols) {
        out << "coefficients " << join(std::span<const double>(model.ols.coefficients)) << '\n'
            << "intercept " << format_number(model.ols.intercept) << '\n'
            << "loo_rmse " << format_number(model.ols.loo_rmse) << '\n';
        return;
    }
    const auto& m = model.svr;
    out << "sigma " << format_number(m.sigma) << '\n'
        << "cost " << format_number(m.cost) << '\n'
        << "epsilon " << format_number(m.epsilon) << '\n'
        << "feature_mean " << join(std::span<const double>(m.feature_mean)) << '\n'
        << "feature_sd " << join(std::span<const double>(m.feature_sd)) << '\n'
        << "target_mean " << format_number(m.target_mean) << '\n'
        << "target_sd " << format_number(m.target_sd) << '\n'
        << "bias " << format_number(m.bias) << '\n'
        << "support " << m.support.size() << '\n';
    for (std::size_t s = 0; s < m.support.size(); ++s) {
        out << "sv " << format_number(m.beta[s]) << ' ' << join(std::span<const double>(m.support[s])) << '\n';
    }
}

FittedModel read_model(const std::filesystem::path& path) {
    ModelReader in(path);
    FittedModel model;
    const auto kind = in.line("model");
    if (kind.size() != 1 || (kind[0] != "ols" && kind[0] != "svr")) throw DataError(path.string() + ": unknown model kind");
    model.kind = kind[0] == "ols" ? ModelKind::ols : ModelKind::svr;
    const auto target = in.line("target");
    model.target = target.empty() ? "" : target[0];
    const auto names = in.line("variables");
    if (model.kind == ModelKind::ols) {
        model.ols.names = names;
        model.ols.coefficients = in.numbers("coefficients", names.size());
        model.ols.intercept = in.number("intercept");
        model.ols.loo_rmse = in.number("loo_rmse");
        return model;
    }
    auto& m = model.svr;
    m.names = names;
    m.sigma = in.number("sigma");
    m.cost = in.number("cost");
    m.epsilon = in.number("epsilon");
    m.feature_mean = in.numbers("feature_mean", names.size());
    m.feature_sd = in.numbers("feature_sd", names.size());
    m.target_mean = in.number("target_mean");
    m.target_sd = in.number("target_sd");
    m.bias = in.number("bias");
    const auto count = static_cast<std::size_t>(in.number("support"));
    for (std::size_t s = 0; s < count; ++s) {
        auto values = in.numbers("sv", names.size() + 1);
        m.beta.push_back(values[0]);
        m.support.emplace_back(values.begin() + 1, values.end());
    }
    return model;
}

}  // namespace agb
