#pragma once

namespace otdebias::loss {

/// Learning-rate schedule state. t is measured in epochs and may be fractional.
struct ScheduleState {
  double t = 0.0;
  double t_w = 10.0;
  double T = 120.0;
  double eta_min = 5e-6;
  double eta_max = 1e-3;
  double eta_init = 1e-4;
  /// Fraction of a half cosine period covered between t_w and T.
  double phi = 0.70;

  void validate() const;
};

/// Linear warmup from eta_init to eta_max over [0, t_w), then
/// eta_min + (eta_max - eta_min) (1 + cos(pi phi (t - t_w) / (T - t_w))) / 2.
double uba_lr(const ScheduleState& state);

}  // namespace otdebias::loss
