#include <doctest.h>

#include <map>
#include <set>

#include "otdebias/cli.hpp"
#include "otdebias/docsbook/corpus.hpp"
#include "otdebias/parallel.hpp"

using namespace otdebias;
using namespace otdebias::docsbook;

TEST_CASE("every registered operation has at least three corpus cases") {
  const auto corpus = load_corpus(default_corpus_dir());
  const auto registry = cli::full_registry();
  std::map<std::string, int> count;
  std::set<std::pair<std::string, std::string>> names;
  for (const auto& c : corpus) {
    count[c.op]++;
    CHECK_MESSAGE(names.insert({c.op, c.name}).second, "duplicate case " << c.op << "/" << c.name);
    CHECK_MESSAGE(registry.find(c.op) != nullptr, "no handler for " << c.op);
  }
  for (const auto& op : registry.ops()) CHECK_MESSAGE(count[op] >= 3, op << " has " << count[op] << " cases");
  CHECK(corpus.size() == 123);
}

TEST_CASE("compare semantics") {
  CHECK_FALSE(compare(json{{"a", 1.0}, {"b", 2}}, json{{"a", 1.05}}, 0.1));
  CHECK(compare(json{{"a", 1.0}}, json{{"a", 1.2}}, 0.1));
  CHECK(compare(json{{"a", 1.0}}, json{{"b", 1.0}}, 0.1));
  CHECK(compare(json::array({1, 2}), json::array({1, 2, 3}), 0.0));
  CHECK(compare(json("x"), json("y"), 1.0));
  CHECK_FALSE(compare(json(true), json(true), 0.0));
}

TEST_CASE("report taxonomy") {
  Registry r;
  r.add("twice", [](const json& in, const Context&) { return json{{"v", 2.0 * in.at("x").get<double>()}}; },
        [](const json& in, const Context&) { return json{{"v", in.at("x").get<double>() + in.at("x").get<double>()}}; });
  r.add("wrong", [](const json&, const Context&) { return json{{"v", 1.0}}; },
        [](const json&, const Context&) { return json{{"v", 2.0}}; });
  r.add("throws", [](const json&, const Context&) -> json { throw std::runtime_error("boom"); });
  const auto mk = [](std::string op, std::string prov, double expected) {
    return parse_case(json{{"op", op}, {"name", op}, {"provenance", prov}, {"inputs", {{"x", 1.5}}},
                           {"expected", {{"v", expected}}}, {"tolerance", 1e-12}});
  };
  const auto rep = run_examples({mk("twice", "DERIVED", 3.0), mk("twice", "TRIVIAL", 4.0), mk("wrong", "DERIVED", 1.0),
                                 mk("wrong", "TRIVIAL", 1.0), mk("throws", "TRIVIAL", 0.0), mk("missing", "TRIVIAL", 0.0)},
                                r);
  REQUIRE(rep.results.size() == 6);
  CHECK(rep.results[0].status == Status::pass);
  CHECK(rep.results[1].status == Status::tolerance_fail);
  CHECK(rep.results[2].status == Status::oracle_mismatch);
  CHECK(rep.results[3].status == Status::pass);
  CHECK(rep.results[4].status == Status::error);
  CHECK(rep.results[5].status == Status::error);
  CHECK(rep.format().find("TOLERANCE_FAIL twice/twice") != std::string::npos);
  CHECK_FALSE(rep.all_passed());
}

TEST_CASE("malformed cases are rejected") {
  CHECK_THROWS(parse_case(json{{"op", "x"}}));
  CHECK_THROWS(parse_case(json{{"op", "x"}, {"name", "y"}, {"provenance", "GUESS"}, {"inputs", json::object()},
                               {"expected", json::object()}}));
  CHECK_THROWS(load_corpus("/nonexistent/dir"));
}

TEST_CASE("report order does not depend on the thread count") {
  auto corpus = load_corpus(default_corpus_dir());
  std::vector<ExampleCase> cheap;
  for (const auto& c : corpus)
    if (c.op == "z_norm" || c.op == "scan" || c.op == "hellinger_sq" || c.op == "focal_loss") cheap.push_back(c);
  const auto registry = default_registry();
  const std::size_t saved = max_threads();
  set_max_threads(1);
  const auto a = run_examples(cheap, registry).format();
  set_max_threads(4);
  const auto b = run_examples(cheap, registry).format();
  set_max_threads(saved);
  CHECK(a == b);
}
