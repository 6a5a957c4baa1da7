#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agb {

// Shortest representation that round-trips exactly; undefined values print as "NA".
std::string format_number(double value);
std::string format_number(const std::optional<double>& value);

// Parses a real number; "NA" and empty cells yield nullopt. Throws DataError on garbage.
std::optional<double> parse_number(std::string_view text);
double parse_required(std::string_view text, std::string_view what);

std::vector<std::string> split_fields(std::string_view line, char sep = ',');
std::string trim(std::string_view text);

// Plain comma-separated table with a header row. Quoting is not supported;
// none of the emitted names contain separators.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
std::string to_csv_string(const CsvTable& table);

}  // namespace agb
