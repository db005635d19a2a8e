#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace otdebias::io {

/// One galaxy: true redshift plus optional prediction, color and class labels.
struct CatalogRow {
  std::string id;
  double z_true = 0.0;
  std::optional<double> z_pred;
  std::optional<double> g_r;
  std::optional<int> class_true;
  std::optional<int> class_pred;
  /// Whether the row survived a simulated selection (synthetic catalogs only).
  std::optional<bool> observed;

  friend bool operator==(const CatalogRow&, const CatalogRow&) = default;
};

/// Header names for each field. id and z_true are mandatory; the rest are read when present.
struct CatalogSchema {
  std::string id = "id";
  std::string z_true = "z_true";
  std::string z_pred = "z_pred";
  std::string g_r = "g_r";
  std::string class_true = "class_true";
  std::string class_pred = "class_pred";
  std::string observed = "observed";
  double z_min = 0.0;
  double z_max = 2.0;
  /// Throw DataError at the first malformed row instead of collecting it.
  bool strict = false;
};

struct RowIssue {
  std::size_t line = 0;
  std::string id;
  std::string reason;
};

struct ParsedCatalog {
  std::vector<CatalogRow> rows;
  /// Malformed rows, with 1-based line numbers (the header is line 1).
  std::vector<RowIssue> errors;
  /// Well-formed rows whose redshifts fall outside [z_min, z_max]; reason "out-of-range".
  std::vector<RowIssue> filtered;
};

/// Reads a headered CSV. Throws SchemaError when a mandatory column is missing,
/// DataError on the first bad row in strict mode, IoError when the file cannot be read.
ParsedCatalog parse_catalog(std::istream& in, const CatalogSchema& schema = {});
ParsedCatalog parse_catalog(const std::filesystem::path& path, const CatalogSchema& schema = {});

/// Writes a header with id, z_true and every optional column that any row sets.
/// Numbers use the shortest representation that reads back to the same double.
void write_catalog(std::ostream& out, const std::vector<CatalogRow>& rows);
void write_catalog(const std::filesystem::path& path, const std::vector<CatalogRow>& rows);

/// Named numeric columns of a headered CSV, in file order.
struct NumericTable {
  std::vector<std::string> header;
  std::map<std::string, std::vector<double>> columns;
  std::size_t rows = 0;
};

/// Reads the requested columns (all columns when `names` is empty); every requested cell must parse.
NumericTable read_numeric_columns(std::istream& in, const std::vector<std::string>& names = {});
NumericTable read_numeric_columns(const std::filesystem::path& path, const std::vector<std::string>& names = {});

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace otdebias::io
