#include <doctest.h>

#include <cmath>

#include "otdebias/catalog.hpp"
#include "otdebias/error.hpp"
#include "otdebias/metrics.hpp"

using namespace otdebias;
using namespace otdebias::metrics;

TEST_CASE("metrics on a small catalog") {
  const std::vector<double> zt{0.1, 0.6, 1.1, 1.9}, zp{0.2, 0.6, 1.5, 1.9};
  const auto r = compute_metrics(zp, zt);
  double mse = 0;
  for (int i = 0; i < 4; ++i) mse += std::pow(std::log1p(zp[i]) - std::log1p(zt[i]), 2) / 4;
  CHECK(r.log_mse == doctest::Approx(mse));
  CHECK(r.bias == doctest::Approx(0.5 / 4));
  CHECK(r.outlier_rate == doctest::Approx(0.25));
  CHECK(r.per_bin[2].n == 1);
  CHECK(r.per_bin[3].label == "1.5-2.0");
  CHECK(r.n_samples == 4);
}

TEST_CASE("out-of-range rows are counted, not used") {
  const std::vector<double> zt{0.1, 2.5}, zp{0.1, 0.3};
  const auto r = compute_metrics(zp, zt);
  CHECK(r.n_samples == 1);
  CHECK(r.n_filtered == 1);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{3.0}, std::vector<double>{3.0}), DataError);
}

TEST_CASE("rows without predictions are a data error") {
  io::CatalogRow row;
  row.id = "a";
  row.z_true = 0.3;
  CHECK_THROWS_AS(compute_metrics(std::vector<io::CatalogRow>{row}), DataError);
}

TEST_CASE("summary arithmetic") {
  CHECK(relative_improvement(0.02346, 0.018072) == doctest::Approx(22.967).epsilon(1e-4));
  CHECK_THROWS(relative_improvement(0.0, 1.0));
  CHECK(coefficient_of_variation(std::vector<double>{75.19, 81.72, 82.42, 80.93}) == doctest::Approx(3.58).epsilon(1e-3));
  CHECK_THROWS(coefficient_of_variation(std::vector<double>{1.0}));
  CHECK(accuracy(std::vector<int>{1, 2, 3, 4}, std::vector<int>{1, 2, 0, 4}) == doctest::Approx(75.0));
  CHECK_THROWS(accuracy(std::vector<int>{1}, std::vector<int>{1, 2}));
}

TEST_CASE("table3 keeps the configuration order") {
  const std::vector<double> zt{0.2, 0.8};
  const std::array<std::vector<double>, 4> preds{std::vector<double>{0.3, 0.9}, std::vector<double>{0.25, 0.85},
                                                 std::vector<double>{0.2, 0.8}, std::vector<double>{0.21, 0.81}};
  const auto t = table3(zt, preds);
  CHECK(t.labels[2] == "hk");
  CHECK(t.reports[2].log_mse == 0.0);
  CHECK(t.reports[0].log_mse > t.reports[1].log_mse);
}
