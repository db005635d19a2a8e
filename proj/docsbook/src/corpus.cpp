#include "otdebias/docsbook/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "otdebias/parallel.hpp"

namespace otdebias::docsbook {

Provenance parse_provenance(const std::string& text) {
  if (text == "PAPER") return Provenance::paper;
  if (text == "TRIVIAL") return Provenance::trivial;
  if (text == "DERIVED") return Provenance::derived;
  throw std::invalid_argument("unknown provenance '" + text + "'");
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::paper: return "PAPER";
    case Provenance::trivial: return "TRIVIAL";
    case Provenance::derived: return "DERIVED";
  }
  return "?";
}

ExampleCase parse_case(const json& j, const std::string& source) {
  ExampleCase c;
  c.op = j.at("op").get<std::string>();
  c.name = j.at("name").get<std::string>();
  c.inputs = j.value("inputs", json::object());
  c.expected = j.at("expected");
  c.tolerance = j.value("tolerance", 0.0);
  c.provenance = parse_provenance(j.at("provenance").get<std::string>());
  c.source = source;
  if (!(c.tolerance >= 0.0)) throw std::invalid_argument(c.op + "/" + c.name + ": tolerance must be nonnegative");
  return c;
}

std::vector<ExampleCase> load_corpus_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open corpus file " + file.string());
  const json doc = json::parse(in);
  if (!doc.is_array()) throw std::runtime_error(file.string() + ": corpus file must hold an array");
  std::vector<ExampleCase> out;
  for (const auto& j : doc) out.push_back(parse_case(j, file.filename().string()));
  return out;
}

std::vector<ExampleCase> load_corpus(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ExampleCase> out;
  for (const auto& f : files) {
    auto part = load_corpus_file(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void Registry::add(const std::string& op, Handler main, Handler oracle) {
  entries_[op] = OpEntry{std::move(main), std::move(oracle)};
}

const OpEntry* Registry::find(const std::string& op) const {
  const auto it = entries_.find(op);
  return it == entries_.end() ? nullptr : &it->second;
}

OpEntry* Registry::find(const std::string& op) {
  const auto it = entries_.find(op);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> Registry::ops() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

std::string status_name(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::tolerance_fail: return "TOLERANCE_FAIL";
    case Status::oracle_mismatch: return "ORACLE_MISMATCH";
    case Status::error: return "ERROR";
  }
  return "?";
}

std::size_t Report::count(Status s) const {
  return static_cast<std::size_t>(
      std::count_if(results.begin(), results.end(), [s](const CaseResult& r) { return r.status == s; }));
}

std::string Report::format() const {
  std::ostringstream out;
  for (const auto& r : results) {
    out << status_name(r.status) << ' ' << r.op << '/' << r.name;
    if (!r.detail.empty()) out << ": " << r.detail;
    out << '\n';
  }
  out << count(Status::pass) << '/' << results.size() << " passed";
  for (Status s : {Status::tolerance_fail, Status::oracle_mismatch, Status::error}) {
    if (const auto n = count(s)) out << ", " << n << ' ' << status_name(s);
  }
  out << '\n';
  return out.str();
}

std::optional<std::string> compare(const json& actual, const json& expected, double tolerance,
                                   const std::string& path) {
  const std::string where = path.empty() ? "value" : path;
  if (expected.is_number()) {
    if (!actual.is_number()) return where + ": expected a number, got " + actual.dump();
    const double a = actual.get<double>(), e = expected.get<double>();
    if (!(std::abs(a - e) <= tolerance)) {
      std::ostringstream s;
      s.precision(17);
      s << where << ": got " << a << ", expected " << e << " (tolerance " << tolerance << ")";
      return s.str();
    }
    return std::nullopt;
  }
  if (expected.is_array()) {
    if (!actual.is_array()) return where + ": expected an array";
    if (actual.size() != expected.size()) {
      return where + ": length " + std::to_string(actual.size()) + ", expected " + std::to_string(expected.size());
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (auto m = compare(actual[i], expected[i], tolerance, where + "[" + std::to_string(i) + "]")) return m;
    }
    return std::nullopt;
  }
  if (expected.is_object()) {
    if (!actual.is_object()) return where + ": expected an object";
    for (const auto& [key, value] : expected.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!actual.contains(key)) return sub + ": missing from output";
      if (auto m = compare(actual.at(key), value, tolerance, sub)) return m;
    }
    return std::nullopt;
  }
  if (actual != expected) return where + ": got " + actual.dump() + ", expected " + expected.dump();
  return std::nullopt;
}

Report run_examples(const std::vector<ExampleCase>& corpus, const Registry& registry, const Context& ctx) {
  Context local = ctx;
  if (!local.registry) local.registry = &registry;
  Report report;
  report.results.resize(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    const auto& c = corpus[i];
    CaseResult r{c.op, c.name, c.provenance, Status::pass, {}};
    try {
      const OpEntry* entry = registry.find(c.op);
      if (!entry || !entry->main) throw std::runtime_error("no handler for op '" + c.op + "'");
      std::optional<json> reference;
      double oracle_tol = c.tolerance;
      if (c.provenance == Provenance::derived && entry->oracle) {
        reference = entry->oracle(c.inputs, local);
        if (reference->is_object() && reference->contains(kOracleToleranceKey)) {
          oracle_tol = std::max(oracle_tol, reference->at(kOracleToleranceKey).get<double>());
          reference->erase(kOracleToleranceKey);
        }
      }
      const json actual = entry->main(c.inputs, local);
      if (reference) {
        if (auto m = compare(actual, *reference, oracle_tol)) {
          r.status = Status::oracle_mismatch;
          r.detail = "oracle disagrees: " + *m;
        }
      }
      if (r.status == Status::pass) {
        if (auto m = compare(actual, c.expected, c.tolerance)) {
          r.status = Status::tolerance_fail;
          r.detail = *m;
        }
      }
    } catch (const std::exception& e) {
      r.status = Status::error;
      r.detail = e.what();
    }
    report.results[i] = std::move(r);
  });
  return report;
}

std::filesystem::path default_corpus_dir() { return OTDEBIAS_DOCSBOOK_EXAMPLES_DIR; }

}  // namespace otdebias::docsbook
