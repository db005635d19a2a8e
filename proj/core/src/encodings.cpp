#include "otdebias/encodings.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "otdebias/error.hpp"

namespace otdebias::encodings {

std::vector<double> CoordEncoding::frequencies() const {
  if (k == 0) throw ParameterError("coordinate encoding needs K >= 1");
  if (!(omega_min > 0.0) || !(omega_max >= omega_min)) {
    throw ParameterError("coordinate encoding needs 0 < omega_min <= omega_max");
  }
  std::vector<double> omega(k);
  const double lo = std::log(omega_min), hi = std::log(omega_max);
  for (std::size_t i = 0; i < k; ++i) {
    omega[i] = k == 1 ? omega_min : std::exp(lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(k - 1));
  }
  // Pin the endpoints exactly.
  omega.front() = omega_min;
  if (k > 1) omega.back() = omega_max;
  return omega;
}

Tensor encode_coord(double theta, const CoordEncoding& enc) {
  const auto omega = enc.frequencies();
  if (enc.normalize) {
    theta = theta / 360.0;
    theta -= std::floor(theta);
  }
  const std::size_t k = omega.size();
  std::vector<double> out(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const double arg = 2.0 * std::numbers::pi * theta * omega[i];
    out[i] = std::sin(arg);
    out[k + i] = std::cos(arg);
  }
  return Tensor({2 * k}, std::move(out));
}

Tensor encode_sky(double ra_deg, double dec_deg, const CoordEncoding& enc) {
  const Tensor ra = encode_coord(ra_deg, enc);
  const Tensor dec = encode_coord(dec_deg, enc);
  std::vector<double> out(ra.values());
  out.insert(out.end(), dec.values().begin(), dec.values().end());
  const std::size_t n = out.size();
  return Tensor({n}, std::move(out));
}

TaskRelation::TaskRelation(std::array<std::array<double, 2>, 2> raw) : raw_(raw) {
  for (std::size_t i = 0; i < 2; ++i) {
    if (!std::isfinite(raw[i][0]) || !std::isfinite(raw[i][1])) throw ParameterError("task logits must be finite");
    const double m = std::max(raw[i][0], raw[i][1]);
    const double e0 = std::exp(raw[i][0] - m), e1 = std::exp(raw[i][1] - m);
    weights_[i] = {e0 / (e0 + e1), e1 / (e0 + e1)};
  }
}

TaskRelation TaskRelation::from_weights(std::array<std::array<double, 2>, 2> weights) {
  std::array<std::array<double, 2>, 2> raw{};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      if (!(weights[i][j] > 0.0 && weights[i][j] < 1.0)) throw ParameterError("task weights must lie in (0, 1)");
      raw[i][j] = std::log(weights[i][j]);
    }
  }
  return TaskRelation(raw);
}

std::pair<Tensor, Tensor> relate_tasks(const Tensor& f_cls, const Tensor& f_red, const TaskRelation& rel) {
  if (f_cls.shape() != f_red.shape()) throw ShapeError("task feature vectors differ in shape");
  Tensor out_cls(f_cls.shape(), 0.0), out_red(f_red.shape(), 0.0);
  for (std::size_t i = 0; i < f_cls.size(); ++i) {
    out_cls[i] = rel(0, 0) * f_cls[i] + rel(0, 1) * f_red[i];
    out_red[i] = rel(1, 0) * f_cls[i] + rel(1, 1) * f_red[i];
  }
  return {std::move(out_cls), std::move(out_red)};
}

}  // namespace otdebias::encodings
