#include "agb/evaluate.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "agb/error.hpp"

namespace agb {
namespace {

void check(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) throw DataError("error metrics need at least one value");
    if (a.size() != b.size()) {
        throw DataError("length mismatch: " + std::to_string(a.size()) + " predictions vs " + std::to_string(b.size()) +
                        " observations");
    }
}

}  // namespace

double mae(std::span<const double> predicted, std::span<const double> observed) {
    check(predicted, observed);
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::abs(predicted[i] - observed[i]);
    return sum / static_cast<double>(predicted.size());
}

double rmse(std::span<const double> predicted, std::span<const double> observed) {
    check(predicted, observed);
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) sum += (predicted[i] - observed[i]) * (predicted[i] - observed[i]);
    return std::sqrt(sum / static_cast<double>(predicted.size()));
}

std::vector<double> pct_errors(std::span<const double> predicted, std::span<const double> observed) {
    check(predicted, observed);
    std::vector<double> out;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!(observed[i] > 0.0)) throw DataError("percentage error needs positive observations");
        out.push_back(100.0 * std::abs(predicted[i] - observed[i]) / observed[i]);
    }
    return out;
}

double mean_pct_error(std::span<const double> predicted, std::span<const double> observed) {
    const auto errors = pct_errors(predicted, observed);
    double sum = 0.0;
    for (double e : errors) sum += e;
    return sum / static_cast<double>(errors.size());
}

ErrorSummary summarize(std::span<const double> predicted, std::span<const double> observed) {
    ErrorSummary s;
    s.n = predicted.size();
    s.mae = mae(predicted, observed);
    s.rmse = rmse(predicted, observed);
    s.pct_error = mean_pct_error(predicted, observed);
    s.accuracy = 100.0 - s.pct_error;
    return s;
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    check(a, b);
    if (a.size() < 3) throw DataError("paired t-test needs at least 3 pairs");
    const auto n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    TTest t;
    t.mean_difference = mean;
    t.df = n - 1.0;
    const double se = std::sqrt(ss / (n - 1.0) / n);
    if (!(se > 0.0)) {
        t.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
        t.p = mean == 0.0 ? 1.0 : 0.0;
        return t;
    }
    t.t = mean / se;
    const boost::math::students_t dist(t.df);
    t.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t.t))));
    return t;
}

std::vector<PairComparison> compare_models(const std::vector<SystemErrors>& systems) {
    if (systems.size() < 2) throw DataError("model comparison needs at least two systems");
    std::vector<PairComparison> pairs;
    for (std::size_t i = 0; i < systems.size(); ++i) {
        for (std::size_t j = i + 1; j < systems.size(); ++j) {
            const TTest t = paired_t_test(systems[i].abs_errors, systems[j].abs_errors);
            pairs.push_back({systems[i].system, systems[j].system, t.mean_difference, t.p, t.p});
        }
    }
    for (auto& p : pairs) p.p_adjusted = bonferroni(p.p_raw, pairs.size());
    return pairs;
}

CsvTable comparison_matrix(const std::vector<SystemErrors>& systems, const std::vector<PairComparison>& pairs) {
    CsvTable csv;
    csv.header.push_back("system");
    for (const auto& s : systems) csv.header.push_back(s.system);
    for (std::size_t i = 0; i < systems.size(); ++i) {
        std::vector<std::string> row{systems[i].system};
        for (std::size_t j = 0; j < systems.size(); ++j) {
            if (i == j) {
                row.push_back(systems[i].system);
                continue;
            }
            const auto& a = systems[std::min(i, j)].system;
            const auto& b = systems[std::max(i, j)].system;
            const auto it = std::find_if(pairs.begin(), pairs.end(),
                                         [&](const PairComparison& p) { return p.first == a && p.second == b; });
            if (it == pairs.end()) {
                row.push_back("NA");
            } else {
                row.push_back(format_number(i < j ? it->difference : it->p_adjusted));
            }
        }
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

std::string comparison_text(const std::vector<SystemErrors>& systems, const std::vector<PairComparison>& pairs) {
    std::ostringstream out;
    out << "Pairwise comparisons of absolute errors (paired t-test, Bonferroni m=" << pairs.size() << ")\n";
    out << "upper: mean difference, lower: adjusted p\n";
    const CsvTable m = comparison_matrix(systems, pairs);
    std::size_t width = 8;
    for (const auto& row : m.rows) {
        for (const auto& cell : row) width = std::max(width, cell.size() + 2);
    }
    auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
    out << pad("");
    for (std::size_t c = 1; c < m.header.size(); ++c) out << pad(m.header[c]);
    out << '\n';
    for (const auto& row : m.rows) {
        for (const auto& cell : row) out << pad(cell);
        out << '\n';
    }
    return out.str();
}

}  // namespace agb
