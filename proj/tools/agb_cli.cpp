#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "agb/allometry.hpp"
#include "agb/discrete_metrics.hpp"
#include "agb/error.hpp"
#include "agb/evaluate.hpp"
#include "agb/features.hpp"
#include "agb/las_io.hpp"
#include "agb/models.hpp"
#include "agb/parallel.hpp"
#include "agb/pipeline.hpp"
#include "agb/preprocess.hpp"
#include "agb/random.hpp"
#include "agb/synth.hpp"
#include "agb/waveform.hpp"

namespace fs = std::filesystem;
using namespace agb;

namespace {

struct Globals {
    std::uint64_t seed = 123;
    unsigned threads = 0;
    std::string config;
};

FeatureTable load_features(const std::string& path, const std::string& inventory, const std::string& target) {
    const CsvTable csv = read_csv(path);
    if (inventory.empty()) {
        if (!csv.column(target)) throw ConfigError(path + " has no " + target + " column; pass --inventory");
        return features_from_csv(csv, target);
    }
    return assemble_features(metrics_from_csv(csv), totals_from_csv(read_csv(inventory)), target);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void cmd_ingest(const std::vector<std::string>& clouds, const std::string& plots_path, const std::string& out,
                double buffer) {
    std::vector<PointCloud> parts;
    for (const auto& c : clouds) parts.push_back(read_las(c));
    const PointCloud cloud = dedupe(merge(parts));
    fs::create_directories(out);
    for (const auto& [id, poly] : read_plots(plots_path)) {
        PointCloud clip;
        if (buffer > 0.0) {
            const Polygon grown = Polygon::rectangle(poly.min_x() - buffer, poly.min_y() - buffer, poly.max_x() + buffer,
                                                     poly.max_y() + buffer);
            clip = clip_polygon(cloud, grown);
        } else {
            clip = clip_polygon(cloud, poly);
        }
        if (clip.empty()) {
            std::cerr << "plot " << id << ": no points, skipped\n";
            continue;
        }
        write_las(clip, fs::path(out) / (id + ".las"));
        std::cout << id << ' ' << clip.size() << " points\n";
    }
    if (const auto reversals = count_gps_time_reversals(cloud)) {
        std::cerr << "note: " << reversals << " GPS time reversals in the merged input\n";
    }
}

void cmd_preprocess(const std::string& in, const std::string& out, const std::string& normalized,
                    const std::string& dtm, bool noise) {
    PointCloud cloud = read_las(in);
    const std::size_t before = cloud.size();
    cloud = dedupe(cloud);
    if (noise) cloud = remove_noise(cloud);
    const auto ground = classify_ground(cloud);
    write_las(ground.cloud, out);
    if (!normalized.empty()) write_las(normalize_heights(ground.cloud, ground.model), normalized);
    if (!dtm.empty()) write_ground_model(dtm, ground.model);
    std::cout << before << " in, " << ground.cloud.size() << " kept, " << ground.ground_points << " ground\n";
}

void cmd_metrics(const std::vector<std::string>& clouds, const std::string& system, double cutoff,
                 const std::string& out) {
    const SystemTag tag = parse_system(system);
    std::vector<MetricVector> rows(clouds.size());
    parallel_for(clouds.size(), [&](std::size_t i) {
        rows[i] = cloud_metrics(read_las(clouds[i]), fs::path(clouds[i]).stem().string(), tag, {cutoff, 0.5});
    });
    write_csv(out, metrics_to_csv(rows));
}

void cmd_simulate(const std::string& cloud_path, const std::string& plots_path, const FootprintConfig& base,
                  double spacing, const std::string& out) {
    const PointCloud cloud = read_las(cloud_path);
    fs::create_directories(out);
    const auto plots = read_plots(plots_path);
    const std::vector<std::pair<std::string, Polygon>> list(plots.begin(), plots.end());
    std::vector<MetricVector> rows(list.size());
    parallel_for(list.size(), [&](std::size_t i) {
        FootprintConfig fc = base;
        fc.seed = derive_seed(base.seed, i);
        rows[i] = plot_waveform_metrics(cloud, list[i].second, list[i].first, fc, spacing, fs::path(out));
    });
    write_csv(fs::path(out) / "metrics.csv", metrics_to_csv(rows));
}

void cmd_inventory(const std::string& trees, const std::string& density, const std::string& plots,
                   const std::string& area_text, const std::string& out) {
    const WoodDensityTable table = density.empty() ? WoodDensityTable() : read_wood_density(density);
    const auto records = read_trees(trees, table);
    std::map<std::string, double> areas;
    if (!plots.empty()) {
        areas = plot_areas(read_plots(plots));
    } else {
        const double area = parse_required(area_text, "--area");
        for (const auto& t : records) areas[t.plot_id] = area;
    }
    std::vector<PlotTotals> totals;
    for (const auto& inv : group_inventory(records, areas)) totals.push_back(plot_totals(inv));
    write_csv(out, totals_to_csv(totals));
}

void cmd_select(const std::string& features, const std::string& inventory, const std::string& target,
                std::uint64_t seed, bool all_rows, const std::string& out) {
    const FeatureTable table = load_features(features, inventory, target);
    const FeatureTable rows = all_rows ? table : table.subset_rows(split_80_20(table.rows(), seed).train);
    const std::string json = report_to_json(run_selection(rows));
    if (out.empty()) {
        std::cout << json;
    } else {
        std::ofstream(out) << json;
    }
}

std::vector<std::string> variables(const std::string& selection, const std::string& vars, const FeatureTable& table) {
    if (!selection.empty()) return report_from_json(slurp(selection)).selected;
    if (!vars.empty()) {
        std::vector<std::string> out;
        for (const auto& v : split_fields(vars, ',')) out.push_back(trim(v));
        return out;
    }
    return table.names;
}

void cmd_fit(const std::string& features, const std::string& inventory, const std::string& target,
             const std::string& kind, const std::string& grid, const std::string& selection, const std::string& vars,
             double sigma, double cost, std::uint64_t seed, const std::string& out, const std::string& surface) {
    const FeatureTable table = load_features(features, inventory, target);
    const auto names = variables(selection, vars, table);
    FittedModel model;
    model.target = target;
    if (kind == "ols") {
        model.kind = ModelKind::ols;
        model.ols = fit_ols(table, names);
        std::cout << "LOO RMSE " << format_number(model.ols.loo_rmse) << '\n';
    } else if (kind == "svr") {
        model.kind = ModelKind::svr;
        if (grid == "default") {
            const GridResult result = grid_search(table, names, kDefaultSigmaGrid, kDefaultCostGrid, {seed, 9});
            if (!surface.empty()) write_csv(surface, surface_to_csv(result));
            sigma = result.sigma;
            cost = result.cost;
            std::cout << "sigma " << format_number(sigma) << " cost " << format_number(cost) << " CV RMSE "
                      << format_number(result.rmse) << '\n';
        } else if (grid != "none") {
            throw ConfigError("--grid must be default or none");
        }
        model.svr = fit_svr(table, names, sigma, cost);
    } else {
        throw ConfigError("--model must be svr or ols");
    }
    write_model(out, model);
}

void cmd_predict(const std::string& model_path, const std::string& features, const std::string& out) {
    const FittedModel model = read_model(model_path);
    const FeatureTable table = features_from_csv(read_csv(features), "");
    const auto predictions = model.predict(table);
    CsvTable csv;
    csv.header = {"plot_id", model.target.empty() ? "predicted" : model.target};
    for (std::size_t r = 0; r < table.rows(); ++r) csv.rows.push_back({table.plot_ids[r], format_number(predictions[r])});
    if (out.empty()) {
        std::cout << to_csv_string(csv);
    } else {
        write_csv(out, csv);
    }
}

void cmd_evaluate(const std::string& pred_path, const std::string& obs_path, const std::string& obs_column,
                  std::vector<std::string> compare, const std::string& out) {
    const CsvTable pred = read_csv(pred_path);
    const CsvTable obs = read_csv(obs_path);
    const auto obs_id = obs.require_column("plot_id");
    const std::string column = obs_column.empty() ? obs.header.back() : obs_column;
    const auto obs_val = obs.require_column(column);
    std::map<std::string, double> truth;
    for (const auto& row : obs.rows) truth[row[obs_id]] = parse_required(row[obs_val], column);

    const auto pred_id = pred.require_column("plot_id");
    if (compare.empty()) {
        for (std::size_t c = 0; c < pred.header.size(); ++c) {
            if (c != pred_id) compare.push_back(pred.header[c]);
        }
    }
    std::vector<SummaryRow> summary;
    std::vector<SystemErrors> systems;
    for (const auto& name : compare) {
        const auto col = pred.column(name);
        if (!col) throw ConfigError("prediction file has no column '" + name + "'");
        std::vector<double> p, o;
        SystemErrors se{name, {}};
        for (const auto& row : pred.rows) {
            const auto it = truth.find(row[pred_id]);
            if (it == truth.end()) throw DataError("no observation for plot " + row[pred_id]);
            p.push_back(parse_required(row[*col], name));
            o.push_back(it->second);
            se.abs_errors.push_back(std::abs(p.back() - o.back()));
        }
        summary.push_back({name, column, "-", "all", summarize(p, o)});
        systems.push_back(std::move(se));
    }
    const CsvTable table = summary_to_csv(summary);
    if (out.empty()) {
        std::cout << to_csv_string(table);
    } else {
        write_csv(out, table);
    }
    if (systems.size() >= 2) std::cout << comparison_text(systems, compare_models(systems));
}

void cmd_synth(const std::string& spec_path, const std::string& out, const std::string& truth, std::uint64_t seed,
               bool seed_given) {
    SceneSpec spec = read_scene_spec(spec_path);
    if (seed_given) spec.seed = seed;
    const Scene scene = generate_scene(spec);
    write_las(scene.cloud, out);
    if (!truth.empty()) write_truth(truth, {scene});
    std::cout << scene.cloud.size() << " points, " << scene.inventory.trees.size() << " plot trees\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiDAR plot metrics and aboveground biomass modelling"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (0: all cores)");
    app.add_option("--config", g.config, "pipeline configuration (INI)");

    std::vector<std::string> clouds;
    std::string plots, out, cloud, normalized, dtm, system = "ALS_D", trees, density, area, features, inventory,
                                                     target = "AGBt", model_kind = "svr", grid = "default", selection,
                                                     vars, model_path, pred, obs, obs_column, spec, truth, surface,
                                                     only;
    std::vector<std::string> compare;
    double buffer = 0.0, cutoff = 1.37, spacing = 0.0, sigma = 1.0, cost = 1.0;
    bool no_noise = false, all_rows = false;
    FootprintConfig footprint;

    auto* ingest = app.add_subcommand("ingest", "clip clouds to plot polygons");
    ingest->add_option("--cloud", clouds, "input LAS files")->required();
    ingest->add_option("--plots", plots, "plot polygons CSV")->required();
    ingest->add_option("--out", out, "output directory")->required();
    ingest->add_option("--buffer", buffer, "margin around each plot bounding box, m");

    auto* preprocess = app.add_subcommand("preprocess", "denoise, classify ground and normalize heights");
    preprocess->add_option("--cloud", cloud, "input LAS")->required();
    preprocess->add_option("--out", out, "classified LAS")->required();
    preprocess->add_option("--normalized", normalized, "height-normalized LAS");
    preprocess->add_option("--dtm", dtm, "ground model text file");
    preprocess->add_flag("--no-noise-filter", no_noise, "skip outlier removal");

    auto* metrics = app.add_subcommand("metrics", "plot metrics from height-normalized clouds");
    metrics->add_option("--cloud", clouds, "normalized LAS per plot (plot id = file stem)")->required();
    metrics->add_option("--system", system, "ALS_D, ULS_D or SLS_FW")->capture_default_str();
    metrics->add_option("--cutoff", cutoff, "minimum height, m")->capture_default_str();
    metrics->add_option("--out", out, "metrics CSV")->required();

    auto* simulate = app.add_subcommand("simulate", "simulate large-footprint waveforms per plot");
    simulate->add_option("--cloud", cloud, "ground-classified LAS")->required();
    simulate->add_option("--plot", plots, "plot polygons CSV")->required();
    simulate->add_option("--diameter", footprint.diameter, "footprint diameter, m")->capture_default_str();
    simulate->add_option("--fwhm", footprint.pulse_fwhm, "pulse FWHM, m")->capture_default_str();
    simulate->add_option("--bin", footprint.bin, "bin size, m")->capture_default_str();
    simulate->add_option("--noise", footprint.noise_sd, "noise standard deviation")->capture_default_str();
    simulate->add_option("--spacing", spacing, "footprint grid spacing, m (0: one per plot)");
    simulate->add_option("--out", out, "output directory")->required();

    auto* inv = app.add_subcommand("inventory", "plot biomass from tree records");
    inv->add_option("--trees", trees, "trees CSV")->required();
    inv->add_option("--density", density, "wood density CSV");
    auto* plots_opt = inv->add_option("--plots", plots, "plot polygons CSV (areas)");
    inv->add_option("--area", area, "plot area, m2, for every plot")->excludes(plots_opt);
    inv->add_option("--out", out, "plot totals CSV")->required();

    auto* sel = app.add_subcommand("select", "feature selection report");
    sel->add_option("--features", features, "metrics or features CSV")->required();
    sel->add_option("--inventory", inventory, "plot totals CSV to join");
    sel->add_option("--target", target, "AGBt or AGBm")->capture_default_str();
    sel->add_flag("--all-rows", all_rows, "select on every row instead of the 80% training split");
    sel->add_option("--out", out, "report JSON");

    auto* fit = app.add_subcommand("fit", "fit an SVR or OLS model");
    fit->add_option("--features", features, "metrics or features CSV")->required();
    fit->add_option("--inventory", inventory, "plot totals CSV to join");
    fit->add_option("--target", target, "AGBt or AGBm")->capture_default_str();
    fit->add_option("--model", model_kind, "svr or ols")->capture_default_str();
    fit->add_option("--grid", grid, "default or none")->capture_default_str();
    fit->add_option("--selection", selection, "selection report JSON");
    fit->add_option("--vars", vars, "comma-separated variables");
    fit->add_option("--sigma", sigma, "kernel sigma when --grid none");
    fit->add_option("--cost", cost, "cost when --grid none");
    fit->add_option("--surface", surface, "grid RMSE surface CSV");
    fit->add_option("--out", out, "model file")->required();

    auto* predict = app.add_subcommand("predict", "apply a model file");
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--features", features, "features CSV")->required();
    predict->add_option("--out", out, "predictions CSV");

    auto* eval = app.add_subcommand("evaluate", "error metrics and pairwise comparison");
    eval->add_option("--pred", pred, "predictions CSV (plot_id + one column per system)")->required();
    eval->add_option("--obs", obs, "observations CSV")->required();
    eval->add_option("--column", obs_column, "observation column (default: last)");
    eval->add_option("--compare", compare, "prediction columns to compare");
    eval->add_option("--out", out, "summary CSV");

    auto* synth = app.add_subcommand("synth", "generate a synthetic forest scene");
    synth->add_option("--spec", spec, "scene INI")->required();
    synth->add_option("--out", out, "output LAS")->required();
    synth->add_option("--truth", truth, "tree truth CSV");

    auto* run = app.add_subcommand("run", "run the full pipeline");
    run->add_option("--only", only, "stop after this stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        thread_count() = g.threads;
        footprint.seed = g.seed;
        if (*ingest) cmd_ingest(clouds, plots, out, buffer);
        if (*preprocess) cmd_preprocess(cloud, out, normalized, dtm, !no_noise);
        if (*metrics) cmd_metrics(clouds, system, cutoff, out);
        if (*simulate) cmd_simulate(cloud, plots, footprint, spacing, out);
        if (*inv) cmd_inventory(trees, density, plots, area, out);
        if (*sel) cmd_select(features, inventory, target, g.seed, all_rows, out);
        if (*fit) cmd_fit(features, inventory, target, model_kind, grid, selection, vars, sigma, cost, g.seed, out, surface);
        if (*predict) cmd_predict(model_path, features, out);
        if (*eval) cmd_evaluate(pred, obs, obs_column, compare, out);
        if (*synth) cmd_synth(spec, out, truth, g.seed, app.get_option("--seed")->count() > 0);
        if (*run) {
            if (g.config.empty()) throw ConfigError("run needs --config");
            PipelineConfig config = load_config(g.config);
            if (app.get_option("--seed")->count() > 0) config.seed = g.seed;
            if (g.threads) config.threads = g.threads;
            const auto stop = only.empty() ? std::nullopt : std::optional<Stage>(parse_stage(only));
            const auto result = run_pipeline(config, stop);
            std::cout << "completed through stage " << to_string(result.last_stage) << ", output in "
                      << config.output.string() << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
