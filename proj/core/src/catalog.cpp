#include "otdebias/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "otdebias/error.hpp"

namespace otdebias::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto field = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.emplace_back(trim(field));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  return std::nullopt;
}

bool blank(const std::string& line) { return trim(line).empty(); }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

ParsedCatalog parse_catalog(std::istream& in, const CatalogSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (line_no == 0 || blank(line)) throw SchemaError("catalog has no header row");
  const auto header = split_csv(line);

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_id = column(schema.id), c_z = column(schema.z_true);
  if (!c_id) throw SchemaError("catalog is missing mandatory column '" + schema.id + "'");
  if (!c_z) throw SchemaError("catalog is missing mandatory column '" + schema.z_true + "'");
  const auto c_pred = column(schema.z_pred), c_gr = column(schema.g_r);
  const auto c_ct = column(schema.class_true), c_cp = column(schema.class_pred), c_obs = column(schema.observed);

  ParsedCatalog out;
  auto reject = [&](std::size_t ln, const std::string& id, const std::string& reason) {
    if (schema.strict) throw DataError("line " + std::to_string(ln) + ": " + reason);
    out.errors.push_back({ln, id, reason});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      reject(line_no, "", "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
      continue;
    }
    CatalogRow row;
    row.id = f[*c_id];
    if (row.id.empty()) {
      reject(line_no, "", "empty id");
      continue;
    }
    const auto z = parse_double(f[*c_z]);
    if (!z) {
      reject(line_no, row.id, "non-numeric " + schema.z_true + " '" + f[*c_z] + "'");
      continue;
    }
    row.z_true = *z;

    std::string bad;
    auto optional_double = [&](std::optional<std::size_t> c, const std::string& name, std::optional<double>& dst) {
      if (!c || f[*c].empty() || !bad.empty()) return;
      if (auto v = parse_double(f[*c])) dst = *v;
      else bad = "non-numeric " + name + " '" + f[*c] + "'";
    };
    auto optional_int = [&](std::optional<std::size_t> c, const std::string& name, std::optional<int>& dst) {
      if (!c || f[*c].empty() || !bad.empty()) return;
      if (auto v = parse_int(f[*c])) dst = *v;
      else bad = "non-integer " + name + " '" + f[*c] + "'";
    };
    optional_double(c_pred, schema.z_pred, row.z_pred);
    optional_double(c_gr, schema.g_r, row.g_r);
    optional_int(c_ct, schema.class_true, row.class_true);
    optional_int(c_cp, schema.class_pred, row.class_pred);
    if (c_obs && !f[*c_obs].empty() && bad.empty()) {
      if (auto v = parse_bool(f[*c_obs])) row.observed = *v;
      else bad = "invalid " + schema.observed + " '" + f[*c_obs] + "'";
    }
    if (!bad.empty()) {
      reject(line_no, row.id, bad);
      continue;
    }

    const auto in_range = [&](double v) { return v >= schema.z_min && v <= schema.z_max; };
    if (!in_range(row.z_true) || (row.z_pred && !in_range(*row.z_pred))) {
      out.filtered.push_back({line_no, row.id, "out-of-range"});
      continue;
    }
    out.rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read error while parsing catalog");
  return out;
}

ParsedCatalog parse_catalog(const std::filesystem::path& path, const CatalogSchema& schema) {
  auto in = open_input(path);
  return parse_catalog(in, schema);
}

void write_catalog(std::ostream& out, const std::vector<CatalogRow>& rows) {
  bool pred = false, gr = false, ct = false, cp = false, obs = false;
  for (const auto& r : rows) {
    pred |= r.z_pred.has_value();
    gr |= r.g_r.has_value();
    ct |= r.class_true.has_value();
    cp |= r.class_pred.has_value();
    obs |= r.observed.has_value();
  }
  out << "id,z_true";
  if (pred) out << ",z_pred";
  if (gr) out << ",g_r";
  if (ct) out << ",class_true";
  if (cp) out << ",class_pred";
  if (obs) out << ",observed";
  out << '\n';
  for (const auto& r : rows) {
    out << r.id << ',' << format_double(r.z_true);
    if (pred) out << ',' << (r.z_pred ? format_double(*r.z_pred) : "");
    if (gr) out << ',' << (r.g_r ? format_double(*r.g_r) : "");
    if (ct) out << ',' << (r.class_true ? std::to_string(*r.class_true) : "");
    if (cp) out << ',' << (r.class_pred ? std::to_string(*r.class_pred) : "");
    if (obs) out << ',' << (r.observed ? (*r.observed ? "1" : "0") : "");
    out << '\n';
  }
}

void write_catalog(const std::filesystem::path& path, const std::vector<CatalogRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_catalog(out, rows);
  if (!out) throw IoError("write error on " + path.string());
}

NumericTable read_numeric_columns(std::istream& in, const std::vector<std::string>& names) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (line_no == 0 || blank(line)) throw SchemaError("CSV has no header row");
  NumericTable t;
  t.header = split_csv(line);
  std::vector<std::pair<std::string, std::size_t>> wanted;
  if (names.empty()) {
    for (std::size_t i = 0; i < t.header.size(); ++i) wanted.emplace_back(t.header[i], i);
  } else {
    for (const auto& n : names) {
      const auto it = std::find(t.header.begin(), t.header.end(), n);
      if (it == t.header.end()) throw SchemaError("CSV is missing column '" + n + "'");
      wanted.emplace_back(n, static_cast<std::size_t>(it - t.header.begin()));
    }
  }
  for (const auto& [n, _] : wanted) t.columns[n];
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != t.header.size()) throw DataError("line " + std::to_string(line_no) + ": wrong field count");
    for (const auto& [n, i] : wanted) {
      const auto v = parse_double(f[i]);
      if (!v) throw DataError("line " + std::to_string(line_no) + ": non-numeric " + n + " '" + f[i] + "'");
      t.columns[n].push_back(*v);
    }
    ++t.rows;
  }
  return t;
}

NumericTable read_numeric_columns(const std::filesystem::path& path, const std::vector<std::string>& names) {
  auto in = open_input(path);
  return read_numeric_columns(in, names);
}

}  // namespace otdebias::io
