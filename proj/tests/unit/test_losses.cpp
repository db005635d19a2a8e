#include <doctest.h>

#include <cmath>

#include "otdebias/error.hpp"
#include "otdebias/losses.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/schedule.hpp"

using namespace otdebias;
using namespace otdebias::loss;

TEST_CASE("focal loss reduces to cross entropy and is weighted by alpha") {
  const std::vector<double> p{0.2, 0.5, 0.3};
  CHECK(focal_loss(p, 1, {}, 0.0).loss == doctest::Approx(-std::log(0.5)));
  const std::vector<double> alpha{1.0, 0.25, 1.0};
  CHECK(focal_loss(p, 1, alpha, 2.0).loss == doctest::Approx(0.25 * 0.25 * -std::log(0.5)));
  const std::vector<double> zero{0.0, 1.0};
  CHECK(focal_loss(zero, 0, {}, 2.0).clamped);
  CHECK_THROWS(focal_loss(p, 3, {}, 2.0));
  CHECK_THROWS(focal_loss(std::vector<double>{0.5, 0.6}, 0, {}, 2.0));
  CHECK_THROWS(focal_loss(p, 0, {}, -1.0));
}

TEST_CASE("softmax is stable for large logits") {
  const auto s = softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(s[0] == doctest::Approx(0.5));
}

TEST_CASE("adaptive gamma and color weights") {
  CHECK(adaptive_gamma(1.0, 1.0) == doctest::Approx(2.0));
  CHECK(adaptive_gamma(2.0, 1.0) == doctest::Approx(2.0 + std::tanh(1.0)));
  CHECK_THROWS(adaptive_gamma(1.0, 0.0));
  CHECK(color_weight(0.6) == 1.0);
  CHECK(color_weight(1.2) == 1.0);
  CHECK(color_weight(0.3) == 0.7);
  CHECK(color_weight(1.5) == 0.7);
  CHECK(color_weight(0.29) == 0.3);
  CHECK(color_weight(1.51) == 0.3);
}

TEST_CASE("redshift loss and its gradient") {
  const std::vector<double> zp{0.5}, zt{0.2};
  const auto r = redshift_loss(zp, zt);
  const double d = std::log(1.5) - std::log(1.2);
  CHECK(r.loss == doctest::Approx(d * d));
  CHECK(r.grad[0] == doctest::Approx(2 * d / 1.5));
  CHECK_THROWS(redshift_loss(zp, std::vector<double>{0.1, 0.2}));
  CHECK_THROWS(redshift_loss(std::vector<double>{-1.5}, zt));
}

TEST_CASE("VIB KL, reparameterization and LSI") {
  VIBState s{{0.5, -1.0}, {2.0, 0.5}, 0.0};
  const auto k = vib_kl(s);
  double ref = 0;
  for (int i = 0; i < 2; ++i) ref += 0.5 * (s.mu[i] * s.mu[i] + s.sigma[i] * s.sigma[i] - 1 - 2 * std::log(s.sigma[i]));
  CHECK(k.kl == doctest::Approx(ref));
  CHECK(k.grad_mu[0] == doctest::Approx(0.5));
  CHECK(k.grad_sigma[1] == doctest::Approx(0.5 - 1 / 0.5));
  Rng a(1), b(1);
  CHECK(reparameterize(s, a) == reparameterize(s, b));
  CHECK_THROWS(vib_kl(VIBState{{0.0}, {0.0}, 0.0}));
  CHECK(lsi_term(1.0, 0.0).value == doctest::Approx(std::sqrt(std::log(2.0))));
  CHECK_THROWS(lsi_term(-1.0, 0.0));
}

TEST_CASE("curriculum and total loss") {
  LossConfig cfg;
  CHECK(hk_curriculum(1, cfg) == 0.0);
  CHECK(hk_curriculum(2, cfg) == 0.0);
  CHECK(hk_curriculum(7, cfg) == doctest::Approx(0.0175));
  CHECK(hk_curriculum(50, cfg) == doctest::Approx(0.035));
  CHECK(hk_curriculum(50, cfg, true) == 0.0);
  cfg.curriculum = CurriculumMode::step;
  CHECK(hk_curriculum(2, cfg) == doctest::Approx(0.035));
  const LossParts parts{1.0, 2.0, 3.0, 4.0, 5.0};
  const auto b = loss_breakdown(parts, LossConfig{}, 20);
  CHECK(b.total == doctest::Approx(1.0 + 0.5 * 2.0 + 0.25 * 3.0 + 0.12 * 4.0 + 0.035 * 5.0));
  CHECK(total_loss(parts, LossConfig{}, 20) == doctest::Approx(b.total));
}

TEST_CASE("learning-rate schedule") {
  ScheduleState s;
  s.t = 0;
  CHECK(uba_lr(s) == doctest::Approx(1e-4));
  s.t = 5;
  CHECK(uba_lr(s) == doctest::Approx(1e-4 + 0.5 * (1e-3 - 1e-4)));
  s.t = 10;
  CHECK(uba_lr(s) == 1e-3);
  s.t = 120;
  CHECK(uba_lr(s) == doctest::Approx(2.1008e-4).epsilon(1e-4));
  s.t = -1;
  CHECK_THROWS(uba_lr(s));
  ScheduleState bad;
  bad.phi = 0.0;
  CHECK_THROWS(uba_lr(bad));
}
