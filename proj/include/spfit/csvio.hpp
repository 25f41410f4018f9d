#ifndef SPFIT_CSVIO_HPP
#define SPFIT_CSVIO_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace spfit {

// Numeric CSV with a header row (UTF-8, comma separated, '.' decimal).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // column-major

  int n_rows() const { return columns.empty() ? 0 : static_cast<int>(data[0].size()); }
  double cell(int row, int col) const { return data[col][row]; }
  int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(std::istream& is);
CsvTable load_csv(const std::string& path);

std::string csv_quote(const std::string& field);

// write-temp-then-rename
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Flat key-value config (INI-like, '#' comments, 'key = value' lines).
struct KvConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string str(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value) { values[key] = value; }

  std::string serialize() const;
  static KvConfig parse(std::istream& is);
  static KvConfig load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace spfit

#endif
