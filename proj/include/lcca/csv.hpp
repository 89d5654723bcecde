#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lcca {

/// Header plus string cells. Comma-delimited, RFC 4180 quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(std::string_view column) const;
  /// Throws Error(missing_column) naming `context` when absent.
  std::size_t column(std::string_view name, std::string_view context = "table") const;
  std::size_t size() const noexcept { return rows.size(); }
};

CsvTable parse_csv(std::string_view text);
/// Throws Error(io) when the file cannot be read.
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
/// Shortest text that reads back as the same double.
std::string format_double(double value);

}  // namespace lcca
