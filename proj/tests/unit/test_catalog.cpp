#include <doctest.h>

#include <sstream>

#include "otdebias/catalog.hpp"
#include "otdebias/error.hpp"
#include "otdebias/galaxy.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/stats.hpp"

using namespace otdebias;
using namespace otdebias::io;

TEST_CASE("catalog round trip") {
  std::istringstream in("id,z_true,z_pred,g_r,class_true\ng1,0.12,0.13,0.85,3\ng2,1.5,,0.2,\n");
  const auto a = parse_catalog(in);
  REQUIRE(a.rows.size() == 2);
  CHECK_FALSE(a.rows[1].z_pred.has_value());
  CHECK(*a.rows[0].class_true == 3);
  std::ostringstream out;
  write_catalog(out, a.rows);
  std::istringstream again(out.str());
  CHECK(parse_catalog(again).rows == a.rows);
}

TEST_CASE("catalog errors") {
  std::istringstream missing("id,z\ng1,0.5\n");
  CHECK_THROWS_AS(parse_catalog(missing), SchemaError);
  std::istringstream bad("id,z_true\ng1,x\n");
  CatalogSchema strict;
  strict.strict = true;
  CHECK_THROWS_AS(parse_catalog(bad, strict), DataError);
  CHECK_THROWS_AS(parse_catalog(std::filesystem::path("/nonexistent/cat.csv")), IoError);
  std::istringstream ragged("id,z_true\ng1,0.5,7\n");
  CHECK(parse_catalog(ragged).errors.size() == 1);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("galaxy renders are deterministic and symmetric") {
  SyntheticGalaxySpec s;
  s.kind = GalaxyKind::elliptical;
  Rng a(1), b(1);
  const Tensor x = gen_galaxy(s, a);
  CHECK(x == gen_galaxy(s, b));
  CHECK(x(10, 20) == doctest::Approx(x(20, 10)).epsilon(1e-12));
  s.kind = GalaxyKind::spiral;
  Rng c(1);
  const Tensor sp = gen_galaxy(s, c);
  CHECK(sp(5, 9) == doctest::Approx(sp(58, 54)).epsilon(1e-9));
  CHECK(parse_galaxy_kind(galaxy_kind_name(GalaxyKind::ring)) == GalaxyKind::ring);
  CHECK_THROWS(parse_galaxy_kind("blob"));
  s.axis_ratio = 0.0;
  CHECK_THROWS(gen_galaxy(s, c));
}

TEST_CASE("renders at two resolutions agree") {
  SyntheticGalaxySpec s;
  Rng rng(1);
  const Tensor lo = gen_galaxy(s, rng);
  s.resolution = 128;
  const Tensor hi = gen_galaxy(s, rng);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) {
      a.push_back(lo(i, j));
      b.push_back(0.25 * (hi(2 * i, 2 * j) + hi(2 * i + 1, 2 * j) + hi(2 * i, 2 * j + 1) + hi(2 * i + 1, 2 * j + 1)));
    }
  CHECK(pearson(a, b) > 0.99);
}
