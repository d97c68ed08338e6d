#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chronos::harness {

/// Shortest decimal form that reads back to the same double ("nan", "inf"
/// and "-inf" for non-finite values).
std::string csv_real(double value);
std::string csv_int(long long value);

class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header);

  [[nodiscard]] const std::vector<std::string>& header() const { return header_; }
  [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  [[nodiscard]] std::size_t column(const std::string& name) const;

  /// Throws kDimensionMismatch when the cell count differs from the header.
  void add_row(std::vector<std::string> cells);

  void write(std::ostream& out) const;
  /// Throws kIoError when the file cannot be written.
  void save(const std::string& path) const;

  static CsvTable read(std::istream& in);
  static CsvTable load(const std::string& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace chronos::harness
