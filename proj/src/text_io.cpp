#include "spikeforge/text_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spikeforge/error.hpp"

namespace spikeforge::text {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

double parse_double(std::string_view field, const std::string& where) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw DataError(where + ": malformed number '" + std::string(field) + "'");
  }
  return value;
}

long long parse_int(std::string_view field, const std::string& where) {
  long long value = 0;
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw DataError(where + ": malformed integer '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string CsvTable::where(std::size_t row) const {
  return path.string() + ":" + std::to_string(line_numbers.at(row));
}

CsvTable read_csv(const std::filesystem::path& path, std::string_view header) {
  const std::string contents = read_file(path);
  CsvTable table;
  table.path = path;
  const std::size_t n_fields = split(header, ',').size();

  std::size_t line_no = 0;
  bool seen_header = false;
  std::string_view rest(contents);
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!seen_header) {
      if (line != header) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != n_fields) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(n_fields) + " fields");
    }
    table.rows.emplace_back(fields.begin(), fields.end());
    table.line_numbers.push_back(line_no);
  }
  if (!seen_header) throw DataError(path.string() + ": empty file, missing header");
  return table;
}

}  // namespace spikeforge::text
