#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "otdebias/tensor.hpp"

namespace otdebias::encodings {

/// Log-spaced sinusoidal encoding of one scalar coordinate.
struct CoordEncoding {
  std::size_t k = 16;
  double omega_min = 1.0 / 360.0;
  double omega_max = 1.0;
  /// Map degrees to turns (theta / 360, wrapped to [0, 1)) before encoding.
  bool normalize = false;

  /// K frequencies exp(log w_min + i (log w_max - log w_min) / (K - 1)).
  std::vector<double> frequencies() const;
};

/// [sin(2 pi theta w_0) .. sin(2 pi theta w_{K-1}), cos(2 pi theta w_0) .. cos(..)], length 2K.
Tensor encode_coord(double theta, const CoordEncoding& enc = {});

/// RA and Dec encoded independently and concatenated, length 4K.
Tensor encode_sky(double ra_deg, double dec_deg, const CoordEncoding& enc = {});

/// Row-softmax normalized 2 x 2 task coupling.
class TaskRelation {
 public:
  TaskRelation() : TaskRelation(std::array<std::array<double, 2>, 2>{}) {}
  explicit TaskRelation(std::array<std::array<double, 2>, 2> raw);

  /// Raw logits whose row softmax reproduces the given row-stochastic matrix.
  static TaskRelation from_weights(std::array<std::array<double, 2>, 2> weights);

  const std::array<std::array<double, 2>, 2>& raw() const { return raw_; }
  const std::array<std::array<double, 2>, 2>& weights() const { return weights_; }
  double operator()(std::size_t i, std::size_t j) const { return weights_[i][j]; }

 private:
  std::array<std::array<double, 2>, 2> raw_;
  std::array<std::array<double, 2>, 2> weights_;
};

/// f'_cls = R11 f_cls + R12 f_red; f'_red = R21 f_cls + R22 f_red.
std::pair<Tensor, Tensor> relate_tasks(const Tensor& f_cls, const Tensor& f_red, const TaskRelation& rel);

}  // namespace otdebias::encodings
