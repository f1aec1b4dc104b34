#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace etfc::csv {

/// Shortest-safe round-trip form: 17 significant digits, "nan"/"inf"/"-inf"
/// for non-finite values.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Accumulates rows in memory and writes them in one go. Rows must match the
/// header width.
class Writer {
 public:
  explicit Writer(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws IoError when absent.
  std::size_t column(std::string_view name) const;
};

Table parse(std::string_view text);
Table load(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace etfc::csv
