#include <doctest.h>

#include <cmath>
#include <numbers>

#include "otdebias/docsbook/oracles.hpp"
#include "otdebias/error.hpp"
#include "otdebias/galaxy.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/wavelet.hpp"

using namespace otdebias;
using namespace otdebias::wavelet;
namespace oracle = otdebias::docsbook::oracle;

TEST_CASE("bank orientation order and normalization") {
  const auto th = bank_orientations();
  CHECK(th[0] == doctest::Approx(std::numbers::pi / 2));
  CHECK(th[3] == doctest::Approx(0.0));
  const auto bank = make_gabor_bank();
  for (const auto& k : bank) {
    double e = 0.0, s = 0.0;
    for (std::size_t i = 0; i < k.real_part.size(); ++i) {
      e += k.real_part[i] * k.real_part[i] + k.imag_part[i] * k.imag_part[i];
      s += k.real_part[i];
    }
    CHECK(e == doctest::Approx(1.0));
    CHECK(std::abs(s) < 1e-12);
  }
  CHECK_THROWS_AS(make_gabor_bank({8, 2.0, 4.0, std::nullopt, true}), ParameterError);
}

TEST_CASE("gabor_value matches its textbook form") {
  for (double th : {0.3, 1.2, 2.5})
    for (double x : {-2.0, 0.0, 1.5})
      for (double y : {-1.0, 0.5}) {
        const auto v = gabor_value(th, 2.0, 4.0, x, y);
        CHECK(v.real() == doctest::Approx(oracle::gabor_real(th, 2.0, 4.0, x, y)).epsilon(1e-12));
        CHECK(v.imag() == doctest::Approx(oracle::gabor_imag(th, 2.0, 4.0, x, y)).epsilon(1e-12));
      }
}

TEST_CASE("decompose equals mirror-padded correlation") {
  Rng rng(11);
  const Tensor img = normal_sample(rng, {12, 10});
  const auto bank = make_gabor_bank({5, 1.2, 3.0, std::nullopt, true});
  const auto st = decompose(img, bank);
  CHECK(st.maps.shape() == Shape{8, 12, 10});
  oracle::Matrix im(12, std::vector<double>(10));
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 10; ++j) im[i][j] = img(i, j);
  for (std::size_t o = 0; o < 4; ++o) {
    oracle::Matrix kr(5, std::vector<double>(5)), ki = kr;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        kr[i][j] = bank[o].real_part(i, j);
        ki[i][j] = bank[o].imag_part(i, j);
      }
    const auto re = oracle::correlate_mirror(im, kr), imv = oracle::correlate_mirror(im, ki);
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        CHECK(st.maps(2 * o, i, j) == doctest::Approx(re[i][j]).epsilon(1e-12));
        CHECK(st.maps(2 * o + 1, i, j) == doctest::Approx(imv[i][j]).epsilon(1e-12));
      }
  }
  CHECK_THROWS(decompose(Tensor({3, 3}), make_gabor_bank()));
}

TEST_CASE("bottleneck pools to 8x8 and records the compression factor") {
  const Tensor img({100, 100}, 0.25);
  const auto b = bottleneck(decompose(img, make_gabor_bank()), 128);
  CHECK(b.grid.shape() == Shape{8, 8, 8});
  CHECK(b.compression_factor == doctest::Approx(2.0));
  const Tensor maps({2, 10, 10}, 3.0);
  const Tensor pooled = adaptive_avg_pool(maps, 8, 8);
  for (double v : pooled.values()) CHECK(v == doctest::Approx(3.0));
}

TEST_CASE("resolution-matched bank scales with the image") {
  const auto p = params_for_resolution({}, 128);
  CHECK(p.sigma == doctest::Approx(4.0));
  CHECK(p.wavelength == doctest::Approx(8.0));
  CHECK(p.size % 2 == 1);
}

TEST_CASE("magnitude features are steadier than real parts under a shift") {
  Rng rng(1);
  io::SyntheticGalaxySpec s;
  const Tensor img = io::gen_galaxy(s, rng);
  Tensor sh(img.shape());
  for (std::size_t i = 0; i < 64; ++i)
    for (std::size_t j = 0; j < 64; ++j) sh(i, j) = img(i, j == 0 ? 0 : j - 1);
  const auto bank = make_gabor_bank();
  const auto a = decompose(img, bank), b = decompose(sh, bank);
  const auto change = [](const Tensor& x, const Tensor& y) {
    double n = 0, d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      n += (x[i] - y[i]) * (x[i] - y[i]);
      d += x[i] * x[i];
    }
    return std::sqrt(n / d);
  };
  CHECK(change(magnitude_maps(a), magnitude_maps(b)) < change(real_maps(a), real_maps(b)));
}
