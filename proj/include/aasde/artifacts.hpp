#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace aasde {

/// Shortest round-trip decimal form of a double ("nan"/"inf" spelled out).
std::string format_number(double v);

/// Writes `contents` to `path` via a sibling temporary file and rename, so
/// readers never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Minimal CSV builder: a header row and rows of numbers.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& row);
  std::size_t rows() const noexcept { return rows_; }
  std::size_t columns() const noexcept { return columns_; }
  const std::string& str() const noexcept { return text_; }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

}  // namespace aasde
