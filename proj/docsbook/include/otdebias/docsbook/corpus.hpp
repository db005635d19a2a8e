#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace otdebias::docsbook {

using json = nlohmann::json;

enum class Provenance { paper, trivial, derived };

Provenance parse_provenance(const std::string& text);
std::string provenance_name(Provenance p);

/// One worked example: an operation, its inputs, the expected outputs and an absolute tolerance.
/// `expected` lists only the output fields the example pins; other fields are ignored.
struct ExampleCase {
  std::string op;
  std::string name;
  json inputs;
  json expected;
  double tolerance = 0.0;
  Provenance provenance = Provenance::trivial;
  /// File the case was loaded from, for reports.
  std::string source;
};

ExampleCase parse_case(const json& j, const std::string& source = {});

/// Every *.json file of `dir`, in file-name order. Each file holds an array of cases.
std::vector<ExampleCase> load_corpus(const std::filesystem::path& dir);
std::vector<ExampleCase> load_corpus_file(const std::filesystem::path& file);

inline constexpr const char* kOracleToleranceKey = "__tolerance";

class Registry;

struct Context {
  const Registry* registry = nullptr;
  std::filesystem::path corpus_dir;
};

/// Runs an operation on a case's inputs and returns its outputs as a JSON object.
using Handler = std::function<json(const json& inputs, const Context& ctx)>;

struct OpEntry {
  Handler main;
  /// Independent recomputation for DERIVED cases. Every field it returns must agree with the
  /// main output; it may return an empty object when the case has nothing to recompute.
  /// Finite-difference oracles add kOracleToleranceKey to widen the agreement tolerance.
  Handler oracle;
};

class Registry {
 public:
  void add(const std::string& op, Handler main, Handler oracle = {});
  const OpEntry* find(const std::string& op) const;
  OpEntry* find(const std::string& op);
  std::vector<std::string> ops() const;

 private:
  std::map<std::string, OpEntry> entries_;
};

/// Handlers for every library operation plus run_examples itself. The CLI registers run_cli.
Registry default_registry();

enum class Status { pass, tolerance_fail, oracle_mismatch, error };

std::string status_name(Status s);

struct CaseResult {
  std::string op;
  std::string name;
  Provenance provenance = Provenance::trivial;
  Status status = Status::pass;
  std::string detail;
};

struct Report {
  std::vector<CaseResult> results;

  std::size_t count(Status s) const;
  bool all_passed() const { return count(Status::pass) == results.size(); }
  /// One line per case ("PASS op/name", "TOLERANCE_FAIL op/name: detail", ...) and a summary line.
  std::string format() const;
};

/// Empty when `actual` matches `expected` within `tolerance`, else a description of the first
/// mismatch. Numbers compare by absolute difference; objects compare only the expected keys.
std::optional<std::string> compare(const json& actual, const json& expected, double tolerance,
                                   const std::string& path = "");

/// Executes every case. DERIVED cases whose op has an oracle run it first: a disagreement
/// between oracle and main is ORACLE_MISMATCH, a disagreement between main and the expected
/// value is TOLERANCE_FAIL, and any exception is ERROR. Results keep corpus order.
Report run_examples(const std::vector<ExampleCase>& corpus, const Registry& registry, const Context& ctx = {});

/// Directory of the corpus shipped with the source tree.
std::filesystem::path default_corpus_dir();

}  // namespace otdebias::docsbook
