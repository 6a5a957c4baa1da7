#include "agb/discrete_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "agb/error.hpp"

namespace agb {

std::string_view to_string(SystemTag tag) {
    switch (tag) {
        case SystemTag::als_d: return "ALS_D";
        case SystemTag::uls_d: return "ULS_D";
        case SystemTag::sls_fw: return "SLS_FW";
    }
    return "?";
}

SystemTag parse_system(std::string_view text) {
    std::string upper(text);
    for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (upper == "ALS_D" || upper == "ALS") return SystemTag::als_d;
    if (upper == "ULS_D" || upper == "ULS") return SystemTag::uls_d;
    if (upper == "SLS_FW" || upper == "SLS") return SystemTag::sls_fw;
    throw ConfigError("unknown system tag '" + std::string(text) + "' (expected ALS_D, ULS_D or SLS_FW)");
}

std::optional<double> MetricVector::get(std::string_view name) const {
    for (const auto& [key, value] : values) {
        if (key == name) return value;
    }
    return std::nullopt;
}

bool MetricVector::has(std::string_view name) const {
    return std::any_of(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
}

double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DataError("percentile of an empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw DataError("percentile level outside [0, 100]");
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(std::span<const double> values, double p) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, p);
}

LMoments l_moments(std::span<const double> values) {
    if (values.empty()) throw DataError("L-moments of an empty sample");
    std::vector<double> x(values.begin(), values.end());
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();

    // b_r = n^-1 sum_i [(i-1)...(i-r)] / [(n-1)...(n-r)] x_(i), i 1-based.
    std::array<double, 4> b{};
    for (std::size_t r = 0; r < 4 && r < n; ++r) {
        double sum = 0.0;
        for (std::size_t i = r; i < n; ++i) {
            double w = 1.0;
            for (std::size_t j = 1; j <= r; ++j) {
                w *= static_cast<double>(i + 1 - j) / static_cast<double>(n - j);
            }
            sum += w * x[i];
        }
        b[r] = sum / static_cast<double>(n);
    }

    LMoments m;
    m.l1 = b[0];
    if (n >= 2) m.l2 = 2 * b[1] - b[0];
    if (n >= 3) m.l3 = 6 * b[2] - 6 * b[1] + b[0];
    if (n >= 4) m.l4 = 20 * b[3] - 30 * b[2] + 12 * b[1] - b[0];
    if (m.l2 && *m.l2 != 0.0) {
        if (m.l3) m.skewness = *m.l3 / *m.l2;
        if (m.l4) m.kurtosis = *m.l4 / *m.l2;
    }
    return m;
}

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, 50.0);
}

double mode_of(std::span<const double> values, double bin) {
    std::map<long long, std::size_t> counts;
    for (double v : values) {
        const auto key = bin > 0.0 ? static_cast<long long>(std::floor(v / bin)) : static_cast<long long>(std::llround(v));
        ++counts[key];
    }
    // std::map iterates ascending, so the first maximum is the smallest bin.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return bin > 0.0 ? (static_cast<double>(best->first) + 0.5) * bin : static_cast<double>(best->first);
}

std::string percentile_name(double level) {
    char buffer[8];
    std::snprintf(buffer, sizeof(buffer), "P%02d", static_cast<int>(level));
    return buffer;
}

}  // namespace

std::vector<std::pair<std::string, std::optional<double>>> channel_statistics(std::span<const double> values,
                                                                             std::string_view prefix,
                                                                             double mode_bin) {
    if (values.empty()) throw DataError("channel statistics of an empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());

    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0, aad = 0.0, sq = 0.0, cube = 0.0;
    for (double v : sorted) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        aad += std::abs(d);
        sq += v * v;
        cube += v * v * v;
    }
    const double variance = sorted.size() > 1 ? m2 / (n - 1.0) : 0.0;
    const double stddev = std::sqrt(variance);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    aad /= n;

    const double min = sorted.front();
    const double max = sorted.back();
    const double median = percentile_sorted(sorted, 50.0);
    const double mode = mode_of(sorted, mode_bin);

    std::vector<double> deviation(sorted.size());
    std::transform(sorted.begin(), sorted.end(), deviation.begin(), [&](double v) { return std::abs(v - median); });
    const double mad_median = median_of(deviation);
    std::transform(sorted.begin(), sorted.end(), deviation.begin(), [&](double v) { return std::abs(v - mode); });
    const double mad_mode = median_of(deviation);

    const bool spread = m2 > 0.0;
    const LMoments lm = l_moments(sorted);

    std::vector<std::pair<std::string, std::optional<double>>> out;
    const std::string p(prefix);
    auto add = [&](const std::string& name, std::optional<double> v) { out.emplace_back(p + "." + name, v); };
    add("minimum", min);
    add("maximum", max);
    add("mean", mean);
    add("median", median);
    add("mode", mode);
    add("stddev", stddev);
    add("variance", variance);
    add("CV", spread && mean != 0.0 ? std::optional<double>(stddev / mean) : std::nullopt);
    add("IQ", percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0));
    add("skewness", spread ? std::optional<double>(m3 / std::pow(m2, 1.5)) : std::nullopt);
    add("kurtosis", spread ? std::optional<double>(m4 / (m2 * m2)) : std::nullopt);
    add("AAD", aad);
    add("MAD.median", mad_median);
    add("MAD.mode", mad_mode);
    add("L1", lm.l1);
    add("L2", lm.l2);
    add("L3", lm.l3);
    add("L4", lm.l4);
    add("L.skewness", lm.skewness);
    add("L.kurtosis", lm.kurtosis);
    for (double level : kPercentileLevels) add(percentile_name(level), percentile_sorted(sorted, level));
    add("SQRT.mean.SQ", std::sqrt(sq / n));
    add("CURT.mean.CUBE", std::cbrt(cube / n));
    return out;
}

MetricVector cloud_metrics(const PointCloud& normalized, const std::string& plot_id, SystemTag system,
                           const CloudMetricsOptions& options) {
    std::vector<double> heights, intensities;
    std::array<double, 9> by_return{};
    for (const auto& p : normalized.points) {
        if (p.z < options.height_cutoff) continue;
        heights.push_back(p.z);
        intensities.push_back(static_cast<double>(p.intensity));
        if (p.return_number >= 1 && p.return_number <= 9) by_return[p.return_number - 1] += 1.0;
    }
    if (heights.size() < 2) {
        throw DataError("plot " + plot_id + ": need at least 2 returns above " + format_number(options.height_cutoff) +
                        " m, found " + std::to_string(heights.size()));
    }

    MetricVector mv;
    mv.plot_id = plot_id;
    mv.system = system;
    mv.add("Total.return.count", static_cast<double>(heights.size()));
    for (std::size_t r = 0; r < by_return.size(); ++r) {
        mv.add("Return." + std::to_string(r + 1) + ".count", by_return[r]);
    }

    auto elev = channel_statistics(heights, "Elev", options.mode_bin);
    const double min = *elev[0].second, max = *elev[1].second, mean = *elev[2].second;
    for (auto& kv : elev) mv.values.push_back(std::move(kv));
    mv.add("Canopy.relief.ratio", max > min ? std::optional<double>((mean - min) / (max - min)) : std::nullopt);

    auto intensity = channel_statistics(intensities, "Int", 0.0);
    for (auto& kv : intensity) {
        // Generalized means are height-only metrics.
        if (kv.first.ends_with("mean.SQ") || kv.first.ends_with("mean.CUBE")) continue;
        mv.values.push_back(std::move(kv));
    }
    return mv;
}

CsvTable metrics_to_csv(const std::vector<MetricVector>& rows) {
    CsvTable table;
    table.header = {"plot_id", "system"};
    std::unordered_map<std::string, std::size_t> column;
    for (const auto& row : rows) {
        for (const auto& [name, value] : row.values) {
            if (column.try_emplace(name, table.header.size()).second) table.header.push_back(name);
        }
    }
    for (const auto& row : rows) {
        std::vector<std::string> cells(table.header.size(), "NA");
        cells[0] = row.plot_id;
        cells[1] = std::string(to_string(row.system));
        for (const auto& [name, value] : row.values) cells[column[name]] = format_number(value);
        table.rows.push_back(std::move(cells));
    }
    return table;
}

std::vector<MetricVector> metrics_from_csv(const CsvTable& table) {
    const auto id_col = table.require_column("plot_id");
    const auto system_col = table.require_column("system");
    std::vector<MetricVector> out;
    for (const auto& row : table.rows) {
        MetricVector mv;
        mv.plot_id = row[id_col];
        mv.system = parse_system(row[system_col]);
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c == id_col || c == system_col) continue;
            mv.add(table.header[c], parse_number(row[c]));
        }
        out.push_back(std::move(mv));
    }
    return out;
}

}  // namespace agb
