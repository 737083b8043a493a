#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spikeforge::text {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Strict decimal parse; throws DataError naming `where` on failure.
double parse_double(std::string_view field, const std::string& where);
long long parse_int(std::string_view field, const std::string& where);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Reads a CSV with the given exact header. Returns rows of fields; each row
// has as many fields as the header. Errors carry file:line.
struct CsvTable {
  std::filesystem::path path;
  std::vector<std::vector<std::string>> rows;
  // 1-based line number of each row in the file.
  std::vector<std::size_t> line_numbers;

  std::string where(std::size_t row) const;
};
CsvTable read_csv(const std::filesystem::path& path, std::string_view header);

}  // namespace spikeforge::text
