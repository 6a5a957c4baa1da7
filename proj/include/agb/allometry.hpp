#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "agb/table_io.hpp"

namespace agb {

inline constexpr double kAgbCoefficient = 0.0673;
inline constexpr double kAgbExponent = 0.976;
inline constexpr double kCarbonFraction = 0.47;
inline constexpr double kCo2PerCarbon = 3.67;
inline constexpr double kDefaultWoodDensity = 0.6;

struct TreeRecord {
    std::string plot_id;
    std::string species;
    double wood_density = kDefaultWoodDensity;  // g/cm3
    double dbh = 0.0;                           // cm
    double height = 0.0;                        // m

    // Throws DataError unless rho in (0.1, 1.5), dbh >= 5 and height > 0.
    void validate() const;
};

// Pantropical form 0.0673 (rho DBH^2 H)^0.976, kg. Throws DataError on
// non-positive inputs.
double tree_agb(double wood_density, double dbh, double height);

struct PlotInventory {
    std::string plot_id;
    double area = 0.0;  // m2
    std::vector<TreeRecord> trees;
};

struct PlotTotals {
    std::string plot_id;
    std::size_t tree_count = 0;
    double agb_kg = 0.0;      // plot sum
    double agbt = 0.0;        // Mg/ha
    double agbm = 0.0;        // kg per tree
    double carbon = 0.0;      // Mg C/ha
    double co2e = 0.0;        // Mg CO2e/ha
};

// Throws DataError for an empty plot or non-positive area.
PlotTotals plot_totals(const PlotInventory& inventory);

// Throw DataError on negative input.
double carbon(double agb);
double co2e(double carbon_mass);

// species -> rho. Unknown species fall back to the default density.
class WoodDensityTable {
public:
    explicit WoodDensityTable(double fallback = kDefaultWoodDensity) : fallback_(fallback) {}
    void set(const std::string& species, double rho) { table_[species] = rho; }
    double lookup(const std::string& species) const;

private:
    std::map<std::string, double> table_;
    double fallback_;
};

WoodDensityTable read_wood_density(const std::filesystem::path& path, double fallback = kDefaultWoodDensity);

// Columns plot_id, species, dbh_cm, height_m and an optional rho. Rows without
// rho take the density table value.
std::vector<TreeRecord> read_trees(const std::filesystem::path& path, const WoodDensityTable& density);
void write_trees(const std::filesystem::path& path, const std::vector<TreeRecord>& trees);

// Groups trees by plot (ordered by id). Every plot needs an area entry.
std::vector<PlotInventory> group_inventory(const std::vector<TreeRecord>& trees,
                                           const std::map<std::string, double>& plot_areas);

// plot_id, trees, AGB_kg, AGBt, AGBm, carbon, CO2e
CsvTable totals_to_csv(const std::vector<PlotTotals>& totals);
std::vector<PlotTotals> totals_from_csv(const CsvTable& table);

}  // namespace agb
