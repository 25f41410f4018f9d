#include "spfit/csvio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spfit/common.hpp"

namespace spfit {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(std::istream& is) {
  CsvTable table;
  std::string line;
  if (!std::getline(is, line))
    fail(ErrorKind::ConfigError, "empty csv input");
  table.columns = split_csv_line(line);
  table.data.resize(table.columns.size());
  int row = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != table.columns.size())
      fail(ErrorKind::ConfigError,
           "csv row " + std::to_string(row + 1) + " has " +
               std::to_string(fields.size()) + " fields, expected " +
               std::to_string(table.columns.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        table.data[c].push_back(std::stod(fields[c]));
      } catch (const std::exception&) {
        fail(ErrorKind::ConfigError,
             "non-numeric csv value '" + fields[c] + "' in column " +
                 table.columns[c]);
      }
    }
    ++row;
  }
  return table;
}

CsvTable load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::InputNotFound, "cannot open " + path);
  return read_csv(is);
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::InputNotFound, "cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::InputNotFound, "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string KvConfig::str(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

std::string KvConfig::require(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    fail(ErrorKind::ConfigError, "missing config key '" + key + "'");
  return it->second;
}

double KvConfig::num(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    fail(ErrorKind::ConfigError, "config key '" + key + "' is not numeric");
  }
}

long KvConfig::integer(const std::string& key, long fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    fail(ErrorKind::ConfigError, "config key '" + key + "' is not an integer");
  }
}

bool KvConfig::boolean(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  fail(ErrorKind::ConfigError, "config key '" + key + "' is not a boolean");
}

std::string KvConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : values) os << k << " = " << v << '\n';
  return os.str();
}

KvConfig KvConfig::parse(std::istream& is) {
  KvConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';' || s[0] == '[') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::ConfigError,
           "config line " + std::to_string(lineno) + " has no '='");
    cfg.values[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::InputNotFound, "cannot open " + path);
  return parse(is);
}

void KvConfig::save(const std::string& path) const {
  write_file_atomic(path, serialize());
}

}  // namespace spfit
