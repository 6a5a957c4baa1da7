#include "agb/allometry.hpp"

#include <cmath>

#include "agb/error.hpp"

namespace agb {

void TreeRecord::validate() const {
    const std::string where = "tree in plot " + plot_id;
    if (!(wood_density > 0.1 && wood_density < 1.5)) {
        throw DataError(where + ": wood density " + format_number(wood_density) + " outside (0.1, 1.5)");
    }
    if (!(dbh >= 5.0)) throw DataError(where + ": DBH " + format_number(dbh) + " cm below the 5 cm census limit");
    if (!(height > 0.0)) throw DataError(where + ": height must be positive");
}

double tree_agb(double wood_density, double dbh, double height) {
    if (!(wood_density > 0.0) || !(dbh > 0.0) || !(height > 0.0)) {
        throw DataError("tree_agb needs positive wood density, DBH and height");
    }
    return kAgbCoefficient * std::pow(wood_density * dbh * dbh * height, kAgbExponent);
}

double carbon(double agb) {
    if (!(agb >= 0.0)) throw DataError("carbon of a negative biomass");
    return kCarbonFraction * agb;
}

double co2e(double carbon_mass) {
    if (!(carbon_mass >= 0.0)) throw DataError("CO2 equivalent of a negative carbon mass");
    return kCo2PerCarbon * carbon_mass;
}

PlotTotals plot_totals(const PlotInventory& inventory) {
    if (inventory.trees.empty()) throw DataError("plot " + inventory.plot_id + " has no trees");
    if (!(inventory.area > 0.0)) throw DataError("plot " + inventory.plot_id + " has no positive area");
    PlotTotals t;
    t.plot_id = inventory.plot_id;
    t.tree_count = inventory.trees.size();
    for (const auto& tree : inventory.trees) t.agb_kg += tree_agb(tree.wood_density, tree.dbh, tree.height);
    // kg per plot -> Mg per hectare.
    t.agbt = t.agb_kg / 1000.0 * (10000.0 / inventory.area);
    t.agbm = t.agb_kg / static_cast<double>(t.tree_count);
    t.carbon = carbon(t.agbt);
    t.co2e = co2e(t.carbon);
    return t;
}

double WoodDensityTable::lookup(const std::string& species) const {
    const auto it = table_.find(species);
    return it == table_.end() ? fallback_ : it->second;
}

WoodDensityTable read_wood_density(const std::filesystem::path& path, double fallback) {
    const CsvTable table = read_csv(path);
    const auto species = table.require_column("species");
    const auto rho = table.require_column("rho");
    WoodDensityTable out(fallback);
    for (const auto& row : table.rows) out.set(row[species], parse_required(row[rho], "rho"));
    return out;
}

std::vector<TreeRecord> read_trees(const std::filesystem::path& path, const WoodDensityTable& density) {
    const CsvTable table = read_csv(path);
    const auto plot = table.require_column("plot_id");
    const auto species = table.require_column("species");
    const auto dbh = table.require_column("dbh_cm");
    const auto height = table.require_column("height_m");
    const auto rho = table.column("rho");
    std::vector<TreeRecord> trees;
    for (const auto& row : table.rows) {
        TreeRecord t;
        t.plot_id = row[plot];
        t.species = row[species];
        t.dbh = parse_required(row[dbh], "dbh_cm");
        t.height = parse_required(row[height], "height_m");
        const auto given = rho ? parse_number(row[*rho]) : std::nullopt;
        t.wood_density = given.value_or(density.lookup(t.species));
        t.validate();
        trees.push_back(std::move(t));
    }
    return trees;
}

void write_trees(const std::filesystem::path& path, const std::vector<TreeRecord>& trees) {
    CsvTable table;
    table.header = {"plot_id", "species", "dbh_cm", "height_m", "rho"};
    for (const auto& t : trees) {
        table.rows.push_back({t.plot_id, t.species, format_number(t.dbh), format_number(t.height),
                              format_number(t.wood_density)});
    }
    write_csv(path, table);
}

std::vector<PlotInventory> group_inventory(const std::vector<TreeRecord>& trees,
                                           const std::map<std::string, double>& plot_areas) {
    std::map<std::string, PlotInventory> plots;
    for (const auto& t : trees) {
        auto& inv = plots[t.plot_id];
        inv.plot_id = t.plot_id;
        inv.trees.push_back(t);
    }
    std::vector<PlotInventory> out;
    for (auto& [id, inv] : plots) {
        const auto area = plot_areas.find(id);
        if (area == plot_areas.end()) throw DataError("no plot area for inventory plot " + id);
        inv.area = area->second;
        out.push_back(std::move(inv));
    }
    return out;
}

CsvTable totals_to_csv(const std::vector<PlotTotals>& totals) {
    CsvTable table;
    table.header = {"plot_id", "trees", "AGB_kg", "AGBt", "AGBm", "carbon", "CO2e"};
    for (const auto& t : totals) {
        table.rows.push_back({t.plot_id, std::to_string(t.tree_count), format_number(t.agb_kg), format_number(t.agbt),
                              format_number(t.agbm), format_number(t.carbon), format_number(t.co2e)});
    }
    return table;
}

std::vector<PlotTotals> totals_from_csv(const CsvTable& table) {
    const auto id = table.require_column("plot_id");
    const auto agbt = table.require_column("AGBt");
    const auto agbm = table.require_column("AGBm");
    const auto trees = table.column("trees");
    const auto kg = table.column("AGB_kg");
    std::vector<PlotTotals> out;
    for (const auto& row : table.rows) {
        PlotTotals t;
        t.plot_id = row[id];
        t.agbt = parse_required(row[agbt], "AGBt");
        t.agbm = parse_required(row[agbm], "AGBm");
        if (trees) t.tree_count = static_cast<std::size_t>(parse_required(row[*trees], "trees"));
        if (kg) t.agb_kg = parse_required(row[*kg], "AGB_kg");
        t.carbon = carbon(t.agbt);
        t.co2e = co2e(t.carbon);
        out.push_back(t);
    }
    return out;
}

}  // namespace agb
