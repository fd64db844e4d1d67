#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace condgpc::io {

/// A numeric CSV table with a single header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Formats with enough digits for an exact double round trip.
std::string format_double(double v);

void write_table(const Table& table, std::ostream& out);
void write_table(const Table& table, const std::filesystem::path& path);
Table read_table(const std::filesystem::path& path);

std::ofstream open_for_write(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace condgpc::io
