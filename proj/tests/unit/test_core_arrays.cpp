#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "otdebias/error.hpp"
#include "otdebias/ndt.hpp"
#include "otdebias/parallel.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/stats.hpp"
#include "otdebias/tensor.hpp"

using namespace otdebias;

TEST_CASE("tensor construction and access") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t(1, 2) == 1.5);
  t(1, 2) = 4.0;
  CHECK(t.at({1, 2}) == 4.0);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor({2}, std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS(Tensor({1}, std::numeric_limits<double>::quiet_NaN()));
  const Tensor r = t.reshaped({3, 2});
  CHECK(r.values() == t.values());
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
}

TEST_CASE("flat index helpers are inverse") {
  const Shape s{3, 4, 5};
  for (std::size_t f = 0; f < 60; ++f) CHECK(flatten_index(s, unflatten_index(s, f)) == f);
}

TEST_CASE("ndt round trip") {
  Rng rng(3);
  const Tensor t = normal_sample(rng, {3, 4, 2});
  CHECK(decode_ndt(encode_ndt(t)) == t);
  auto bytes = encode_ndt(t);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NDT1");
  bytes[0] = 'X';
  CHECK_THROWS(decode_ndt(bytes));
  auto truncated = encode_ndt(t);
  truncated.pop_back();
  CHECK_THROWS(decode_ndt(truncated));
}

TEST_CASE("rng is deterministic and streams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  const Rng s1 = c.split(1), s2 = c.split(2);
  CHECK(Rng(s1).next_u64() != Rng(s2).next_u64());
  CHECK(c.counter() == 0);
  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("default seed reads the environment") {
  ::setenv("OTDEBIAS_SEED", "123", 1);
  CHECK(default_seed(5) == 123);
  ::unsetenv("OTDEBIAS_SEED");
  CHECK(default_seed(5) == 5);
}

TEST_CASE("parallel_for visits every index once, nested calls included") {
  const std::size_t saved = max_threads();
  set_max_threads(4);
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  std::atomic<int> inner{0};
  parallel_for(8, [&](std::size_t) { parallel_for(8, [&](std::size_t) { inner++; }); });
  CHECK(inner.load() == 64);
  set_max_threads(saved);
}

TEST_CASE("stats helpers") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == doctest::Approx(2.5));
  CHECK(population_stddev(v) == doctest::Approx(std::sqrt(1.25)));
  CHECK(coefficient_of_variation_percent(v) == doctest::Approx(100 * std::sqrt(1.25) / 2.5));
  const std::vector<double> w{2, 4, 6, 8};
  CHECK(pearson(v, w) == doctest::Approx(1.0));
}
