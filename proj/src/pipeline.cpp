#include "agb/pipeline.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "agb/allometry.hpp"
#include "agb/error.hpp"
#include "agb/parallel.hpp"
#include "agb/random.hpp"
#include "agb/synth.hpp"

namespace agb {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::ingest: return "ingest";
        case Stage::preprocess: return "preprocess";
        case Stage::metrics: return "metrics";
        case Stage::simulate: return "simulate";
        case Stage::inventory: return "inventory";
        case Stage::select: return "select";
        case Stage::fit: return "fit";
        case Stage::predict: return "predict";
        case Stage::evaluate: return "evaluate";
        case Stage::report: return "report";
    }
    return "?";
}

Stage parse_stage(std::string_view name) {
    for (Stage s : kAllStages) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown stage '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto& field : split_fields(text, ',')) {
        auto t = trim(field);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> number_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    for (const auto& f : split_list(text)) out.push_back(parse_required(f, key));
    return out;
}

fs::path resolve(const fs::path& base, const std::string& value) {
    const fs::path p(value);
    return p.is_absolute() ? p : base / p;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path.string());
}

}  // namespace

void PipelineConfig::validate() const {
    require_file(plots, "plot file");
    require_file(inventory, "inventory file");
    if (wood_density) require_file(*wood_density, "wood density file");
    if (systems.empty()) throw ConfigError("no systems configured");
    for (const auto& s : systems) {
        if (s.clouds.empty()) throw ConfigError("system " + s.name + " lists no clouds");
        for (const auto& c : s.clouds) require_file(c, "cloud for system " + s.name);
        if (!(s.thin_density >= 0.0)) throw ConfigError("thin density must be non-negative");
    }
    for (const auto& t : targets) {
        if (t != "AGBt" && t != "AGBm") throw ConfigError("unknown target '" + t + "'");
    }
    if (targets.empty()) throw ConfigError("no targets configured");
    if (sigma_grid.empty() || cost_grid.empty()) throw ConfigError("empty hyperparameter grid");
    for (double s : sigma_grid) {
        if (!(s > 0.0)) throw ConfigError("sigma grid values must be positive");
    }
    for (double c : cost_grid) {
        if (!(c > 0.0)) throw ConfigError("cost grid values must be positive");
    }
    if (repeats == 0) throw ConfigError("repeats must be positive");
    if (!(footprint_spacing >= 0.0)) throw ConfigError("footprint spacing must be non-negative");
    footprint.validate();
}

PipelineConfig load_config(const fs::path& path) {
    require_file(path, "config file");
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    PipelineConfig c;
    try {
        c.seed = tree.get("general.seed", c.seed);
        c.threads = tree.get("general.threads", c.threads);
        c.output = resolve(base, tree.get("general.output", c.output.string()));
        if (auto t = tree.get_optional<std::string>("general.targets")) c.targets = split_list(*t);

        c.plots = resolve(base, tree.get<std::string>("data.plots"));
        c.inventory = resolve(base, tree.get<std::string>("data.inventory"));
        if (auto d = tree.get_optional<std::string>("data.wood_density")) c.wood_density = resolve(base, *d);
        c.default_wood_density = tree.get("data.default_wood_density", c.default_wood_density);

        for (const auto& name : split_list(tree.get<std::string>("data.systems"))) {
            SystemConfig s;
            s.tag = parse_system(name);
            s.name = std::string(to_string(s.tag));
            const auto& section = tree.get_child(name);
            for (const auto& cloud : split_list(section.get<std::string>("clouds"))) s.clouds.push_back(resolve(base, cloud));
            s.thin_density = section.get("thin_density", 0.0);
            c.systems.push_back(std::move(s));
        }

        c.remove_noise = tree.get("preprocess.remove_noise", c.remove_noise);
        c.noise.neighbors = tree.get("preprocess.noise_neighbors", c.noise.neighbors);
        c.noise.sigma_mult = tree.get("preprocess.noise_sigma", c.noise.sigma_mult);
        c.ground.cell = tree.get("preprocess.ground_cell", c.ground.cell);
        c.ground.max_window = tree.get("preprocess.ground_max_window", c.ground.max_window);
        c.ground.slope = tree.get("preprocess.ground_slope", c.ground.slope);
        c.ground.initial_distance = tree.get("preprocess.ground_initial_distance", c.ground.initial_distance);
        c.ground.max_distance = tree.get("preprocess.ground_max_distance", c.ground.max_distance);
        c.height_floor = tree.get("preprocess.height_floor", c.height_floor);

        c.metrics.height_cutoff = tree.get("metrics.height_cutoff", c.metrics.height_cutoff);
        c.metrics.mode_bin = tree.get("metrics.mode_bin", c.metrics.mode_bin);

        c.footprint.diameter = tree.get("waveform.diameter", c.footprint.diameter);
        if (auto s = tree.get_optional<double>("waveform.footprint_sigma")) c.footprint.footprint_sigma = *s;
        c.footprint.pulse_fwhm = tree.get("waveform.pulse_fwhm", c.footprint.pulse_fwhm);
        c.footprint.bin = tree.get("waveform.bin", c.footprint.bin);
        c.footprint.noise_sd = tree.get("waveform.noise_sd", c.footprint.noise_sd);
        c.footprint.rho_v = tree.get("waveform.rho_v", c.footprint.rho_v);
        c.footprint.rho_g = tree.get("waveform.rho_g", c.footprint.rho_g);
        c.footprint_spacing = tree.get("waveform.spacing", c.footprint_spacing);

        c.selection.correlation_threshold = tree.get("select.correlation_threshold", c.selection.correlation_threshold);
        c.selection.rule.threshold = tree.get("select.importance_threshold", c.selection.rule.threshold);
        c.selection.rule.fallback_k = tree.get("select.fallback_k", c.selection.rule.fallback_k);
        c.selection.rule.min_vars = tree.get("select.min_vars", c.selection.rule.min_vars);
        c.selection.rule.max_vars = tree.get("select.max_vars", c.selection.rule.max_vars);

        if (auto g = tree.get_optional<std::string>("fit.sigma_grid")) c.sigma_grid = number_list(*g, "sigma_grid");
        if (auto g = tree.get_optional<std::string>("fit.cost_grid")) c.cost_grid = number_list(*g, "cost_grid");
        c.repeats = tree.get("fit.repeats", c.repeats);
        c.svr.epsilon = tree.get("fit.epsilon", c.svr.epsilon);
        c.svr.tolerance = tree.get("fit.tolerance", c.svr.tolerance);
        c.ols_max_vars = tree.get("fit.ols_max_vars", c.ols_max_vars);
    } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

std::vector<Vec2> footprint_centres(const Polygon& plot, double spacing) {
    if (!(spacing > 0.0)) return {plot.centroid()};
    std::vector<Vec2> out;
    for (double y = plot.min_y() + spacing / 2.0; y <= plot.max_y(); y += spacing) {
        for (double x = plot.min_x() + spacing / 2.0; x <= plot.max_x(); x += spacing) {
            if (plot.contains(x, y)) out.push_back({x, y});
        }
    }
    if (out.empty()) out.push_back(plot.centroid());
    return out;
}

std::map<std::string, double> plot_areas(const std::map<std::string, Polygon>& plots) {
    std::map<std::string, double> out;
    for (const auto& [id, poly] : plots) out[id] = poly.area();
    return out;
}

MetricVector plot_waveform_metrics(const PointCloud& classified, const Polygon& plot, const std::string& plot_id,
                                   const FootprintConfig& base, double spacing,
                                   const std::optional<fs::path>& dump_dir) {
    const auto centres = footprint_centres(plot, spacing);
    std::vector<MetricVector> footprints;
    for (std::size_t i = 0; i < centres.size(); ++i) {
        FootprintConfig fc = base;
        fc.center_x = centres[i].x;
        fc.center_y = centres[i].y;
        fc.seed = derive_seed(base.seed, i);
        fc.wave_id = centres.size() == 1 ? plot_id : plot_id + "_" + std::to_string(i + 1);
        const Waveform wf = simulate_footprint(classified, fc);
        if (dump_dir) write_waveform(*dump_dir / (fc.wave_id + ".wf"), wf);
        footprints.push_back(to_metric_vector(waveform_metrics(wf, classified, fc), plot_id));
    }
    return average_metrics(footprints, plot_id);
}

CsvTable summary_to_csv(const std::vector<SummaryRow>& rows) {
    CsvTable csv;
    csv.header = {"system", "target", "model", "subset", "n", "MAE", "RMSE", "pct_error", "accuracy"};
    for (const auto& r : rows) {
        csv.rows.push_back({r.system, r.target, r.model, r.subset, std::to_string(r.errors.n), format_number(r.errors.mae),
                            format_number(r.errors.rmse), format_number(r.errors.pct_error),
                            format_number(r.errors.accuracy)});
    }
    return csv;
}

namespace {

class Runner {
public:
    explicit Runner(const PipelineConfig& config) : c_(config), out_(config.output) {}

    PipelineResult run(std::optional<Stage> stop_after) {
        PipelineResult result;
        fs::create_directories(out_);
        for (Stage s : kAllStages) {
            tagged(s, [&] { dispatch(s); });
            result.last_stage = s;
            if (stop_after && *stop_after == s) break;
        }
        result.summary = summary_;
        return result;
    }

private:
    template <typename Fn>
    static void tagged(Stage stage, Fn&& fn) {
        const std::string tag = "stage " + std::string(to_string(stage)) + ": ";
        try {
            fn();
        } catch (const ConfigError& e) {
            throw ConfigError(tag + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError(tag + e.what());
        } catch (const DataError& e) {
            throw DataError(tag + e.what());
        } catch (const fs::filesystem_error& e) {
            throw ConfigError(tag + e.what());
        }
    }

    void dispatch(Stage s) {
        switch (s) {
            case Stage::ingest: ingest(); break;
            case Stage::preprocess: preprocess(); break;
            case Stage::metrics: metrics(); break;
            case Stage::simulate: simulate(); break;
            case Stage::inventory: inventory(); break;
            case Stage::select: select_features(); break;
            case Stage::fit: fit(); break;
            case Stage::predict: predict(); break;
            case Stage::evaluate: evaluate(); break;
            case Stage::report: report(); break;
        }
    }

    const std::map<std::string, Polygon>& plots() {
        if (plots_.empty()) plots_ = read_plots(c_.plots);
        if (plots_.empty()) throw DataError("plot file lists no plots");
        return plots_;
    }

    std::vector<std::pair<std::string, Polygon>> plot_list() {
        const auto& p = plots();
        return {p.begin(), p.end()};
    }

    fs::path dir(const std::string& a, const std::string& b = "") {
        fs::path d = out_ / a;
        if (!b.empty()) d /= b;
        fs::create_directories(d);
        return d;
    }

    std::string key(const SystemConfig& s, const std::string& target) const { return s.name + "_" + target; }

    void ingest() {
        const auto list = plot_list();
        for (std::size_t si = 0; si < c_.systems.size(); ++si) {
            const auto& sys = c_.systems[si];
            std::vector<PointCloud> parts;
            for (const auto& path : sys.clouds) parts.push_back(read_las(path));
            const PointCloud cloud = dedupe(merge(parts));
            const fs::path d = dir("ingest", sys.name);
            const double radius = 3.0 * c_.footprint.sigma() + 2.0;
            parallel_for(list.size(), [&](std::size_t pi) {
                const auto& [id, poly] = list[pi];
                PointCloud clip;
                double area = poly.area();
                if (sys.waveform()) {
                    const Vec2 centre = poly.centroid();
                    const double reach = radius + (c_.footprint_spacing > 0.0
                                                       ? std::hypot(poly.max_x() - poly.min_x(), poly.max_y() - poly.min_y())
                                                       : 0.0);
                    clip = clip_circle(cloud, centre.x, centre.y, reach);
                    area = std::numbers::pi * reach * reach;
                } else {
                    clip = clip_polygon(cloud, poly);
                }
                if (sys.thin_density > 0.0) {
                    clip = thin_pulses(clip, sys.thin_density, area, derive_seed(c_.seed, 1000 * (si + 1) + pi));
                }
                if (clip.empty()) throw DataError("plot " + id + " has no points in system " + sys.name);
                write_las(clip, d / (id + ".las"));
            });
        }
    }

    void preprocess() {
        const auto list = plot_list();
        for (const auto& sys : c_.systems) {
            const fs::path in = out_ / "ingest" / sys.name;
            const fs::path d = dir("preprocess", sys.name);
            parallel_for(list.size(), [&](std::size_t pi) {
                const auto& id = list[pi].first;
                PointCloud cloud = read_las(in / (id + ".las"));
                if (c_.remove_noise) cloud = remove_noise(cloud, c_.noise);
                const auto ground = classify_ground(cloud, c_.ground);
                write_las(ground.cloud, d / (id + ".las"));
                write_ground_model(d / (id + ".dtm"), ground.model);
                write_las(normalize_heights(ground.cloud, ground.model, c_.height_floor), d / (id + "_norm.las"));
            });
        }
    }

    void metrics() {
        const auto list = plot_list();
        for (const auto& sys : c_.systems) {
            if (sys.waveform()) continue;
            const fs::path in = out_ / "preprocess" / sys.name;
            std::vector<MetricVector> rows(list.size());
            parallel_for(list.size(), [&](std::size_t pi) {
                const auto& id = list[pi].first;
                rows[pi] = cloud_metrics(read_las(in / (id + "_norm.las")), id, sys.tag, c_.metrics);
            });
            write_csv(dir("metrics") / (sys.name + ".csv"), metrics_to_csv(rows));
        }
    }

    void simulate() {
        const auto list = plot_list();
        for (std::size_t si = 0; si < c_.systems.size(); ++si) {
            const auto& sys = c_.systems[si];
            if (!sys.waveform()) continue;
            const fs::path in = out_ / "preprocess" / sys.name;
            const fs::path dumps = dir("waveforms", sys.name);
            std::vector<MetricVector> rows(list.size());
            parallel_for(list.size(), [&](std::size_t pi) {
                const auto& [id, poly] = list[pi];
                FootprintConfig fc = c_.footprint;
                fc.seed = derive_seed(c_.seed, 2000 * (si + 1) + pi);
                rows[pi] = plot_waveform_metrics(read_las(in / (id + ".las")), poly, id, fc, c_.footprint_spacing, dumps);
            });
            write_csv(dir("metrics") / (sys.name + ".csv"), metrics_to_csv(rows));
        }
    }

    void inventory() {
        const WoodDensityTable density = c_.wood_density ? read_wood_density(*c_.wood_density, c_.default_wood_density)
                                                         : WoodDensityTable(c_.default_wood_density);
        const auto trees = read_trees(c_.inventory, density);
        std::vector<PlotTotals> totals;
        for (const auto& inv : group_inventory(trees, plot_areas(plots()))) totals.push_back(plot_totals(inv));
        write_csv(dir("inventory") / "plots.csv", totals_to_csv(totals));
    }

    FeatureTable features(const SystemConfig& sys, const std::string& target) {
        return features_from_csv(read_csv(out_ / "features" / (key(sys, target) + ".csv")), target);
    }

    SelectionReport selection(const SystemConfig& sys, const std::string& target) {
        std::ifstream in(out_ / "select" / (key(sys, target) + ".json"));
        if (!in) throw ConfigError("missing selection report for " + key(sys, target));
        std::stringstream ss;
        ss << in.rdbuf();
        return report_from_json(ss.str());
    }

    void select_features() {
        const auto totals = totals_from_csv(read_csv(out_ / "inventory" / "plots.csv"));
        for (const auto& sys : c_.systems) {
            const auto metrics = metrics_from_csv(read_csv(out_ / "metrics" / (sys.name + ".csv")));
            for (const auto& target : c_.targets) {
                std::vector<std::string> missing;
                const FeatureTable table = assemble_features(metrics, totals, target, &missing);
                write_csv(dir("features") / (key(sys, target) + ".csv"), features_to_csv(table));
                const Split split = split_80_20(table.rows(), c_.seed);
                SelectionReport report = run_selection(table.subset_rows(split.train), c_.selection);
                report.dropped_missing = missing;
                std::ofstream(dir("select") / (key(sys, target) + ".json")) << report_to_json(report);
            }
        }
    }

    void fit() {
        for (const auto& sys : c_.systems) {
            for (const auto& target : c_.targets) {
                const FeatureTable table = features(sys, target);
                const auto names = selection(sys, target).selected;
                const GridResult grid =
                    grid_search(table, names, c_.sigma_grid, c_.cost_grid, CvScheme{c_.seed, c_.repeats}, c_.svr);
                write_csv(dir("grid") / (key(sys, target) + ".csv"), surface_to_csv(grid));
                const Split split = split_80_20(table.rows(), c_.seed);
                const FeatureTable train = table.subset_rows(split.train);
                FittedModel svr{ModelKind::svr, target, {}, fit_svr(train, names, grid.sigma, grid.cost, c_.svr)};
                FittedModel ols{ModelKind::ols, target, fit_ols(train, names, c_.ols_max_vars), {}};
                const fs::path d = dir("models");
                write_model(d / (key(sys, target) + "_svr.model"), svr);
                write_model(d / (key(sys, target) + "_ols.model"), ols);
            }
        }
    }

    void predict() {
        for (const auto& sys : c_.systems) {
            for (const auto& target : c_.targets) {
                const FeatureTable table = features(sys, target);
                const auto svr = read_model(out_ / "models" / (key(sys, target) + "_svr.model")).predict(table);
                const auto ols = read_model(out_ / "models" / (key(sys, target) + "_ols.model")).predict(table);
                const Split split = split_80_20(table.rows(), c_.seed);
                std::vector<std::string> set(table.rows(), "train");
                for (auto t : split.test) set[t] = "test";
                CsvTable csv;
                csv.header = {"plot_id", "set", "observed", "svr", "ols"};
                for (std::size_t r = 0; r < table.rows(); ++r) {
                    csv.rows.push_back({table.plot_ids[r], set[r], format_number(table.target[r]), format_number(svr[r]),
                                        format_number(ols[r])});
                }
                write_csv(dir("predict") / (key(sys, target) + ".csv"), csv);
            }
        }
    }

    void evaluate() {
        summary_.clear();
        CsvTable errors;
        errors.header = {"system", "target", "model", "plot_id", "set", "observed", "predicted", "pct_error"};
        const fs::path d = dir("evaluate");
        for (const auto& target : c_.targets) {
            for (const std::string model : {"svr", "ols"}) {
                std::vector<SystemErrors> systems;
                for (const auto& sys : c_.systems) {
                    const CsvTable pred = read_csv(out_ / "predict" / (key(sys, target) + ".csv"));
                    const auto set_col = pred.require_column("set");
                    const auto obs_col = pred.require_column("observed");
                    const auto pred_col = pred.require_column(model);
                    const auto id_col = pred.require_column("plot_id");
                    std::vector<double> p_all, o_all, p_test, o_test;
                    SystemErrors se{sys.name, {}};
                    for (const auto& row : pred.rows) {
                        const double o = parse_required(row[obs_col], "observed");
                        const double p = parse_required(row[pred_col], model);
                        p_all.push_back(p);
                        o_all.push_back(o);
                        if (row[set_col] == "test") {
                            p_test.push_back(p);
                            o_test.push_back(o);
                        }
                        se.abs_errors.push_back(std::abs(p - o));
                        errors.rows.push_back({sys.name, target, model, row[id_col], row[set_col], row[obs_col],
                                               row[pred_col], format_number(100.0 * std::abs(p - o) / o)});
                    }
                    summary_.push_back({sys.name, target, model, "all", summarize(p_all, o_all)});
                    summary_.push_back({sys.name, target, model, "test", summarize(p_test, o_test)});
                    systems.push_back(std::move(se));
                }
                if (systems.size() >= 2 && systems.front().abs_errors.size() >= 3) {
                    const auto pairs = compare_models(systems);
                    const std::string stem = "compare_" + target + "_" + model;
                    write_csv(d / (stem + ".csv"), comparison_matrix(systems, pairs));
                    std::ofstream(d / (stem + ".txt")) << comparison_text(systems, pairs);
                }
            }
        }
        write_csv(d / "summary.csv", summary_to_csv(summary_));
        write_csv(d / "errors.csv", errors);
    }

    void report() {
        if (summary_.empty()) {
            const CsvTable csv = read_csv(out_ / "evaluate" / "summary.csv");
            for (const auto& row : csv.rows) {
                SummaryRow r{row[0], row[1], row[2], row[3], {}};
                r.errors.n = static_cast<std::size_t>(parse_required(row[4], "n"));
                r.errors.mae = parse_required(row[5], "MAE");
                r.errors.rmse = parse_required(row[6], "RMSE");
                r.errors.pct_error = parse_required(row[7], "pct_error");
                r.errors.accuracy = parse_required(row[8], "accuracy");
                summary_.push_back(r);
            }
        }
        std::ofstream out(out_ / "report.txt");
        out << "AGB estimation summary (seed " << c_.seed << ")\n\n";
        out << "system   target  model  subset   n        MAE       RMSE   %error  accuracy\n";
        for (const auto& r : summary_) {
            char line[160];
            std::snprintf(line, sizeof(line), "%-8s %-7s %-6s %-6s %3zu %10.3f %10.3f %8.2f %9.2f\n", r.system.c_str(),
                          r.target.c_str(), r.model.c_str(), r.subset.c_str(), r.errors.n, r.errors.mae, r.errors.rmse,
                          r.errors.pct_error, r.errors.accuracy);
            out << line;
        }
        out << '\n';
        for (const auto& target : c_.targets) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& r : summary_) {
                if (r.target == target && r.model == "svr" && r.subset == "all") {
                    sum += r.errors.pct_error;
                    ++n;
                }
            }
            if (n) out << "mean SVR " << target << " error across systems: " << format_number(sum / static_cast<double>(n)) << "%\n";
        }
    }

    const PipelineConfig& c_;
    fs::path out_;
    std::map<std::string, Polygon> plots_;
    std::vector<SummaryRow> summary_;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, std::optional<Stage> stop_after) {
    config.validate();
    if (config.threads) thread_count() = config.threads;
    Runner runner(config);
    return runner.run(stop_after);
}

}  // namespace agb
