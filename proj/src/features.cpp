#include "agb/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <json.hpp>
#include <set>

#include "agb/error.hpp"

namespace agb {
namespace {

constexpr double kZeroVariance = 1e-12;

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

double polynomial_r2(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const int degree = static_cast<int>(std::clamp<Eigen::Index>(n - 2, 1, 3));
    double mean = 0.0, scale = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    for (double v : x) scale = std::max(scale, std::abs(v - mean));
    if (scale == 0.0) return 0.0;

    Eigen::MatrixXd design(n, degree + 1);
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (x[static_cast<std::size_t>(i)] - mean) / scale;
        double p = 1.0;
        for (int d = 0; d <= degree; ++d) {
            design(i, d) = p;
            p *= u;
        }
        target(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
    const double ss_res = (design * beta - target).squaredNorm();
    const double ss_tot = (target.array() - target.mean()).matrix().squaredNorm();
    if (!(ss_tot > 0.0)) return 0.0;
    return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

}  // namespace

const std::vector<double>& FeatureTable::column(std::string_view name) const {
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (names[c] == name) return columns[c];
    }
    throw DataError("feature table has no column '" + std::string(name) + "'");
}

FeatureTable FeatureTable::subset_rows(std::span<const std::size_t> rows) const {
    FeatureTable out;
    out.names = names;
    out.target_name = target_name;
    out.columns.resize(columns.size());
    for (auto r : rows) {
        out.plot_ids.push_back(plot_ids.at(r));
        if (!target.empty()) out.target.push_back(target.at(r));
        for (std::size_t c = 0; c < columns.size(); ++c) out.columns[c].push_back(columns[c][r]);
    }
    return out;
}

FeatureTable FeatureTable::subset_columns(std::span<const std::string> keep) const {
    FeatureTable out;
    out.plot_ids = plot_ids;
    out.target_name = target_name;
    out.target = target;
    for (const auto& name : keep) {
        out.names.push_back(name);
        out.columns.push_back(column(name));
    }
    return out;
}

FeatureTable assemble_features(const std::vector<MetricVector>& metrics, const std::vector<PlotTotals>& totals,
                               const std::string& target, std::vector<std::string>* dropped_missing) {
    if (target != "AGBt" && target != "AGBm") throw ConfigError("target must be AGBt or AGBm, got '" + target + "'");
    std::map<std::string, double> truth;
    for (const auto& t : totals) truth[t.plot_id] = target == "AGBt" ? t.agbt : t.agbm;

    FeatureTable table;
    table.target_name = target;
    std::vector<const MetricVector*> joined;
    for (const auto& mv : metrics) {
        const auto it = truth.find(mv.plot_id);
        if (it == truth.end()) continue;
        joined.push_back(&mv);
        table.plot_ids.push_back(mv.plot_id);
        table.target.push_back(it->second);
    }
    if (joined.size() < 2) throw DataError("fewer than two plots have both metrics and inventory");

    for (const auto& [name, unused] : joined.front()->values) {
        (void)unused;
        std::vector<double> column;
        bool complete = true;
        for (const auto* mv : joined) {
            const auto v = mv->get(name);
            if (!v || !std::isfinite(*v)) {
                complete = false;
                break;
            }
            column.push_back(*v);
        }
        if (complete) {
            table.names.push_back(name);
            table.columns.push_back(std::move(column));
        } else if (dropped_missing) {
            dropped_missing->push_back(name);
        }
    }
    return table;
}

CsvTable features_to_csv(const FeatureTable& table) {
    CsvTable csv;
    csv.header.push_back("plot_id");
    for (const auto& n : table.names) csv.header.push_back(n);
    csv.header.push_back(table.target_name);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        std::vector<std::string> row{table.plot_ids[r]};
        for (const auto& col : table.columns) row.push_back(format_number(col[r]));
        row.push_back(format_number(table.target[r]));
        csv.rows.push_back(std::move(row));
    }
    return csv;
}

FeatureTable features_from_csv(const CsvTable& csv, const std::string& target) {
    const auto id = csv.require_column("plot_id");
    const auto tcol = target.empty() ? std::nullopt : csv.column(target);
    FeatureTable table;
    table.target_name = target;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
        const auto& h = csv.header[c];
        if (c == id || (tcol && c == *tcol) || h == "system" || h == "AGBt" || h == "AGBm") continue;
        const bool complete = std::all_of(csv.rows.begin(), csv.rows.end(), [&](const auto& row) {
            const auto v = parse_number(row[c]);
            return v && std::isfinite(*v);
        });
        if (!complete) continue;
        feature_cols.push_back(c);
        table.names.push_back(h);
    }
    table.columns.resize(feature_cols.size());
    for (const auto& row : csv.rows) {
        table.plot_ids.push_back(row[id]);
        if (tcol) table.target.push_back(parse_required(row[*tcol], target));
        for (std::size_t k = 0; k < feature_cols.size(); ++k) table.columns[k].push_back(*parse_number(row[feature_cols[k]]));
    }
    return table;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw DataError("pearson needs two equal-length samples of size >= 2");
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<std::string> drop_zero_variance(FeatureTable& table) {
    std::vector<std::string> dropped, names;
    std::vector<std::vector<double>> columns;
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (sample_variance(table.columns[c]) < kZeroVariance) {
            dropped.push_back(table.names[c]);
        } else {
            names.push_back(table.names[c]);
            columns.push_back(std::move(table.columns[c]));
        }
    }
    if (names.empty()) throw DataError("every feature column has zero variance");
    table.names = std::move(names);
    table.columns = std::move(columns);
    return dropped;
}

std::vector<CorrelationDrop> correlation_filter(FeatureTable& table, double threshold) {
    std::vector<std::size_t> order(table.cols());
    std::vector<double> strength(table.cols());
    for (std::size_t c = 0; c < table.cols(); ++c) {
        order[c] = c;
        strength[c] = std::abs(pearson(table.columns[c], table.target).value_or(0.0));
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (strength[a] != strength[b]) return strength[a] > strength[b];
        return table.names[a] < table.names[b];
    });

    std::vector<std::size_t> kept;
    std::vector<CorrelationDrop> dropped;
    for (auto c : order) {
        std::optional<CorrelationDrop> clash;
        for (auto k : kept) {
            const double r = pearson(table.columns[c], table.columns[k]).value_or(0.0);
            if (std::abs(r) >= threshold) {
                clash = CorrelationDrop{table.names[c], table.names[k], r};
                break;
            }
        }
        if (clash) {
            dropped.push_back(*clash);
        } else {
            kept.push_back(c);
        }
    }

    FeatureTable filtered = table;
    filtered.names.clear();
    filtered.columns.clear();
    for (auto k : kept) {
        filtered.names.push_back(table.names[k]);
        filtered.columns.push_back(table.columns[k]);
    }
    table = std::move(filtered);
    return dropped;
}

std::vector<std::pair<std::string, double>> importance(const FeatureTable& table) {
    if (table.rows() < 3) throw DataError("importance needs at least 3 rows");
    std::vector<std::pair<std::string, double>> scores;
    for (std::size_t c = 0; c < table.cols(); ++c) {
        scores.emplace_back(table.names[c], polynomial_r2(table.columns[c], table.target));
    }
    if (scores.empty()) return scores;
    double lo = scores.front().second, hi = lo;
    for (const auto& [name, s] : scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (auto& [name, s] : scores) s = hi > lo ? (s - lo) / (hi - lo) : 1.0;
    return scores;
}

Selection select(std::vector<std::pair<std::string, double>> scores, const SelectRule& rule) {
    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Selection out;
    std::size_t qualified = 0;
    while (qualified < scores.size() && scores[qualified].second >= rule.threshold) ++qualified;
    std::size_t take = qualified;
    if (qualified == 0) {
        take = rule.fallback_k;
        out.fallback_used = true;
    } else if (qualified < rule.min_vars) {
        take = rule.min_vars;
        out.extended = true;
    }
    take = std::min({take, rule.max_vars, scores.size()});
    for (std::size_t i = 0; i < take; ++i) out.names.push_back(scores[i].first);
    return out;
}

SelectionReport run_selection(FeatureTable table, const SelectionOptions& options) {
    SelectionReport report;
    report.target = table.target_name;
    report.dropped_zero_variance = drop_zero_variance(table);
    report.dropped_correlated = correlation_filter(table, options.correlation_threshold);
    report.scores = importance(table);
    const Selection chosen = select(report.scores, options.rule);
    report.selected = chosen.names;
    report.fallback_used = chosen.fallback_used;
    report.extended = chosen.extended;
    return report;
}

std::string report_to_json(const SelectionReport& report) {
    nlohmann::ordered_json j;
    j["target"] = report.target;
    j["dropped_missing"] = report.dropped_missing;
    j["dropped_zero_variance"] = report.dropped_zero_variance;
    auto& correlated = j["dropped_correlated"] = nlohmann::ordered_json::array();
    for (const auto& d : report.dropped_correlated) {
        correlated.push_back({{"name", d.name}, {"kept", d.kept}, {"r", d.r}});
    }
    auto& scores = j["importance"] = nlohmann::ordered_json::array();
    for (const auto& [name, s] : report.scores) scores.push_back({{"name", name}, {"score", s}});
    j["selected"] = report.selected;
    j["fallback_used"] = report.fallback_used;
    j["extended_to_minimum"] = report.extended;
    return j.dump(2) + "\n";
}

SelectionReport report_from_json(const std::string& text) {
    SelectionReport report;
    try {
        const auto j = nlohmann::json::parse(text);
        report.target = j.at("target").get<std::string>();
        report.dropped_missing = j.value("dropped_missing", std::vector<std::string>{});
        report.dropped_zero_variance = j.value("dropped_zero_variance", std::vector<std::string>{});
        for (const auto& d : j.value("dropped_correlated", nlohmann::json::array())) {
            report.dropped_correlated.push_back(
                {d.at("name").get<std::string>(), d.at("kept").get<std::string>(), d.at("r").get<double>()});
        }
        for (const auto& s : j.value("importance", nlohmann::json::array())) {
            report.scores.emplace_back(s.at("name").get<std::string>(), s.at("score").get<double>());
        }
        report.selected = j.at("selected").get<std::vector<std::string>>();
        report.fallback_used = j.value("fallback_used", false);
        report.extended = j.value("extended_to_minimum", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed selection report: ") + e.what());
    }
    if (report.selected.empty()) throw DataError("selection report lists no selected features");
    return report;
}

}  // namespace agb
