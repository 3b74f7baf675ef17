#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gpstc::csv {

/// A parsed CSV file: header plus rows of raw cells. Cells may be empty.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws IoError when absent.
  std::size_t column(const std::string& name) const;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Parses a cell as a double; throws IoError naming the cell on failure.
double parse_double(const std::string& cell, const std::string& context);
/// Empty cell -> nullopt.
std::optional<double> parse_optional_double(const std::string& cell, const std::string& context);

Table read(const std::filesystem::path& path);
void write(const Table& table, const std::filesystem::path& path);

}  // namespace gpstc::csv
