#include <doctest.h>

#include <cmath>
#include <numeric>

#include "otdebias/docsbook/oracles.hpp"
#include "otdebias/error.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/transport.hpp"

using namespace otdebias;
using namespace otdebias::transport;
namespace oracle = otdebias::docsbook::oracle;

namespace {
std::vector<double> random_mass(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double s = 0;
  for (auto& x : v) s += (x = rng.uniform(0.01, 1.0));
  for (auto& x : v) x /= s;
  return v;
}
}  // namespace

TEST_CASE("histogram binning rules") {
  HKConfig cfg;
  cfg.n_bins = 4;
  const std::vector<double> v{0.0, 0.5, 1.999, 2.0, 2.5, -0.1};
  const auto h = histogram(v, cfg);
  CHECK(h.n_clamped == 2);
  CHECK(h.total() == doctest::Approx(1.0));
  const auto ref = oracle::bin_indices(v, h.edges);
  std::vector<double> m(4, 0.0);
  for (auto b : ref) m[b] += 1.0 / v.size();
  for (std::size_t i = 0; i < 4; ++i) CHECK(h.mass[i] == doctest::Approx(m[i]));
  CHECK_THROWS(histogram(std::vector<double>{}, cfg));
  CHECK_THROWS_AS(make_histogram({0.0, 1.0, 0.5}, {0.5, 0.5}), DataError);
}

TEST_CASE("sinkhorn plan has the requested marginals") {
  Rng rng(3);
  const auto edges = uniform_edges(12, 0.0, 2.0);
  const auto cost = squared_distance_cost(make_histogram(edges, std::vector<double>(12, 1.0 / 12)).centers());
  const auto a = random_mass(12, rng), b = random_mass(12, rng);
  const auto p = sinkhorn(a, b, cost, {0.05, 1e-10, 5000});
  CHECK(p.converged);
  for (std::size_t i = 0; i < 12; ++i) {
    double row = 0, col = 0;
    for (std::size_t j = 0; j < 12; ++j) {
      row += p.plan(i, j);
      col += p.plan(j, i);
    }
    CHECK(row == doctest::Approx(a[i]).epsilon(1e-8));
    CHECK(col == doctest::Approx(b[i]).epsilon(1e-8));
  }
  for (std::size_t k = 1; k < p.err_trace.size(); ++k) CHECK(p.err_trace[k] <= p.err_trace[k - 1]);
}

TEST_CASE("sinkhorn approaches the exact optimum") {
  const std::vector<double> a{0.2, 0.5, 0.3}, b{0.4, 0.4, 0.2};
  const oracle::Matrix cm{{0, 1, 4}, {1, 0, 1}, {4, 1, 0}};
  const auto p = sinkhorn(a, b, squared_distance_cost(std::vector<double>{0, 1, 2}), {1e-3, 1e-9, 20000});
  CHECK(p.transport_cost == doctest::Approx(oracle::exact_ot(a, b, cm)).epsilon(1e-3));
}

TEST_CASE("sinkhorn input validation") {
  const Tensor c = squared_distance_cost(std::vector<double>{0, 1});
  CHECK_THROWS_AS(sinkhorn(std::vector<double>{0.5, 0.6}, std::vector<double>{0.5, 0.5}, c), DataError);
  CHECK_THROWS_AS(sinkhorn(std::vector<double>{1.5, -0.5}, std::vector<double>{0.5, 0.5}, c), DataError);
  CHECK_THROWS(sinkhorn(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}, c, {0.0, 1e-4, 50}));
}

TEST_CASE("HK symmetry, identity and the Hellinger term") {
  Rng rng(5);
  HKConfig cfg;
  const auto e = uniform_edges(cfg.n_bins, cfg.z_lo, cfg.z_hi);
  const auto p = make_histogram(e, random_mass(cfg.n_bins, rng)), q = make_histogram(e, random_mass(cfg.n_bins, rng));
  CHECK(hk_distance_sq(p, q, cfg).hk2 == doctest::Approx(hk_distance_sq(q, p, cfg).hk2).epsilon(1e-12));
  CHECK(std::abs(hk_distance_sq(p, p, cfg).hk2) < 1e-6);
  CHECK(hellinger_sq(p, q) == doctest::Approx(oracle::hellinger_sq(p.mass, q.mass)));
  const auto s = hk_distance_sq(p, q, cfg, HKForm::sqrt_density);
  CHECK(std::isfinite(s.hk2));
}

TEST_CASE("HK histogram gradient matches finite differences along the simplex") {
  Rng rng(6);
  HKConfig cfg;
  cfg.n_bins = 8;
  cfg.stop_tol = 1e-12;
  cfg.max_iter = 5000;
  const auto e = uniform_edges(8, 0.0, 2.0);
  const auto pm = random_mass(8, rng), qm = random_mass(8, rng);
  const auto g = hk_distance_sq_grad(make_histogram(e, pm), make_histogram(e, qm), cfg).grad_p;
  // Directional derivative along e_0 - e_1 keeps the mass fixed.
  const double h = 1e-6;
  auto plus = pm, minus = pm;
  plus[0] += h, plus[1] -= h, minus[0] -= h, minus[1] += h;
  const double fd = (hk_distance_sq(make_histogram(e, plus), make_histogram(e, qm), cfg).hk2 -
                     hk_distance_sq(make_histogram(e, minus), make_histogram(e, qm), cfg).hk2) /
                    (2 * h);
  CHECK(g[0] - g[1] == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("soft histogram rows are distributions") {
  const auto edges = uniform_edges(10, 0.0, 2.0);
  const std::vector<double> z{0.1, 0.95, 3.0};
  const auto s = soft_histogram(z, edges, 0.2);
  CHECK(s.hist.total() == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double r = 0;
    for (std::size_t j = 0; j < 10; ++j) r += s.rows(i, j);
    CHECK(r == doctest::Approx(1.0));
  }
  CHECK_THROWS(soft_histogram(z, edges, 0.0));
}
