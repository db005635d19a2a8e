#include <doctest.h>

#include <cmath>

#include "otdebias/biaslab.hpp"
#include "otdebias/error.hpp"
#include "otdebias/rng.hpp"

using namespace otdebias;
using namespace otdebias::biaslab;

TEST_CASE("selection parsing") {
  const auto s = parse_selection("logistic:z0=0.8,k=6");
  CHECK(s.kind == SelectionKind::logistic);
  CHECK(s(0.8, 0.5) == doctest::Approx(0.5));
  CHECK(parse_selection("none")(1.9, 0.0) == 1.0);
  CHECK(parse_selection("step:z_cut=1")(1.2, 0.0) == 0.0);
  CHECK_THROWS_AS(parse_selection("logistic:k=abc"), ParameterError);
  CHECK_THROWS_AS(parse_selection("banana"), ParameterError);
  CHECK_THROWS_AS(parse_selection("color:c0=0.5,k=4,floor=0"), ParameterError);
  CHECK_THROWS_AS(parse_selection("logistic:q=1"), ParameterError);
}

TEST_CASE("catalog sampling is seeded and respects the selection") {
  Rng a(7), b(7);
  const auto s = parse_selection("logistic:z0=0.8,k=6");
  const auto c1 = sample_catalog({}, s, 2000, a), c2 = sample_catalog({}, s, 2000, b);
  CHECK(c1.rows == c2.rows);
  CHECK(c1.rows.size() == 2000);
  CHECK(c1.n_accepted < 2000);
  CHECK(ks_statistic(c1.true_dist, c1.observed_dist) > 0.05);
  Rng c(1);
  CHECK_THROWS_AS(sample_catalog({}, parse_selection("step:z_cut=0"), 1000, c), DegenerateSelectionError);
}

TEST_CASE("isotonic fit") {
  const auto f = isotonic_fit({1.0, 3.0, 2.0, 4.0}, {1.0, 1.0, 1.0, 1.0});
  CHECK(f[1] == doctest::Approx(2.5));
  CHECK(f[2] == doctest::Approx(2.5));
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i] >= f[i - 1]);
}

TEST_CASE("recalibration stays on the simplex and reduces HK") {
  Rng rng(7);
  const auto cat = sample_catalog({}, parse_selection("logistic:z0=0.8,k=6"), 5000, rng);
  RecalibrateOptions opt;
  opt.steps = 100;
  const auto r = hk_recalibrate(cat.observed_dist, cat.true_dist, {}, opt);
  CHECK(r.recovered.total() == doctest::Approx(1.0));
  CHECK(r.loss_trace.back() < r.loss_trace.front());
  CHECK_FALSE(r.failed);
}
