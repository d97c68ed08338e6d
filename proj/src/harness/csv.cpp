#include "chronos/harness/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "chronos/diagnostics.hpp"

namespace chronos::harness {

namespace {
constexpr const char* kModule = "harness";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}
}  // namespace

std::string csv_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

std::string csv_int(long long value) { return std::to_string(value); }

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  raise(errc::kUnknownName, "no column named " + name, __func__, kModule);
}

void CsvTable::add_row(std::vector<std::string> cells) {
  CHRONOS_REQUIRE(cells.size() == header_.size(), errc::kDimensionMismatch,
                  "row has a different number of cells than the header");
  rows_.push_back(std::move(cells));
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
}

void CsvTable::save(const std::string& path) const {
  std::ofstream f(path);
  CHRONOS_REQUIRE(f.good(), errc::kIoError, "cannot open " + path + " for writing");
  write(f);
  f.flush();
  CHRONOS_REQUIRE(f.good(), errc::kIoError, "write to " + path + " failed");
}

CsvTable CsvTable::read(std::istream& in) {
  std::string line;
  CHRONOS_REQUIRE(static_cast<bool>(std::getline(in, line)), errc::kIoError, "missing header");
  CsvTable t(split_line(line));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.add_row(split_line(line));
  }
  return t;
}

CsvTable CsvTable::load(const std::string& path) {
  std::ifstream f(path);
  CHRONOS_REQUIRE(f.good(), errc::kIoError, "cannot open " + path);
  return read(f);
}

}  // namespace chronos::harness
