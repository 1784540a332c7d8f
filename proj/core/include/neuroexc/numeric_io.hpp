#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace neuroexc {

/// Shortest decimal string that round-trips to the same double.
/// Locale independent.
std::string format_double(double value);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_text(const std::filesystem::path& path);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::size_t column(std::string_view name) const;
    [[nodiscard]] std::vector<double> column_values(std::string_view name) const;
};

/// Numeric CSV with a single header line.
CsvTable parse_csv(std::string_view text, std::string_view source = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace neuroexc
