#include <doctest.h>

#include <cmath>
#include <numbers>

#include "otdebias/encodings.hpp"
#include "otdebias/error.hpp"

using namespace otdebias;
using namespace otdebias::encodings;

TEST_CASE("frequencies are log spaced") {
  CoordEncoding e{4, 1.0, 1000.0, false};
  const auto w = e.frequencies();
  REQUIRE(w.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(std::pow(10.0, double(i))));
}

TEST_CASE("encoding layout is sines then cosines") {
  CoordEncoding e{3, 1.0, 100.0, false};
  const Tensor v = encode_coord(0.1, e);
  REQUIRE(v.size() == 6);
  const auto w = e.frequencies();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(v[i] == doctest::Approx(std::sin(2 * std::numbers::pi * 0.1 * w[i])));
    CHECK(v[3 + i] == doctest::Approx(std::cos(2 * std::numbers::pi * 0.1 * w[i])));
  }
  const Tensor s = encode_sky(150.0, -2.0, e);
  CHECK(s.size() == 12);
}

TEST_CASE("normalize wraps degrees into turns") {
  CoordEncoding e{2, 1.0, 2.0, true};
  const Tensor a = encode_coord(90.0, e), b = encode_coord(450.0, e);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
}

TEST_CASE("invalid encodings are rejected") {
  CHECK_THROWS_AS(encode_coord(0.0, CoordEncoding{0, 1.0, 2.0, false}), ParameterError);
  CHECK_THROWS_AS(encode_coord(0.0, CoordEncoding{3, 2.0, 1.0, false}), ParameterError);
}

TEST_CASE("task relation rows are a softmax") {
  const TaskRelation r({{{1.0, -1.0}, {0.0, 2.0}}});
  for (int i = 0; i < 2; ++i) CHECK(r(i, 0) + r(i, 1) == doctest::Approx(1.0));
  const auto f = TaskRelation::from_weights({{{0.45, 0.55}, {0.32, 0.68}}});
  CHECK(f(0, 1) == doctest::Approx(0.55));
  CHECK(f(1, 0) == doctest::Approx(0.32));
  const auto [c, z] = relate_tasks(Tensor({2}, std::vector<double>{1.0, 2.0}), Tensor({2}, std::vector<double>{3.0, 4.0}), f);
  CHECK(c[0] == doctest::Approx(0.45 + 0.55 * 3.0));
  CHECK(z[1] == doctest::Approx(0.32 * 2.0 + 0.68 * 4.0));
  CHECK_THROWS(relate_tasks(Tensor({2}), Tensor({3}), f));
}
