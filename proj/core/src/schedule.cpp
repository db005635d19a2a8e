#include "otdebias/schedule.hpp"

#include <cmath>
#include <numbers>

#include "otdebias/error.hpp"

namespace otdebias::loss {

void ScheduleState::validate() const {
  if (!(t >= 0.0)) throw ParameterError("schedule time must be nonnegative");
  if (t > T) throw ParameterError("schedule time exceeds the total epoch count");
  if (!(t_w >= 0.0 && t_w < T)) throw ParameterError("warmup must satisfy 0 <= t_w < T");
  if (!(eta_min < eta_init && eta_init <= eta_max)) throw ParameterError("need eta_min < eta_init <= eta_max");
  if (!(phi > 0.0 && phi <= 1.0)) throw ParameterError("phi must lie in (0, 1]");
}

double uba_lr(const ScheduleState& s) {
  s.validate();
  if (s.t < s.t_w) return s.eta_init + (s.eta_max - s.eta_init) * (s.t / s.t_w);
  const double progress = (s.t - s.t_w) / (s.T - s.t_w);
  // Written as a decay from eta_max so that t == t_w returns eta_max bit for bit.
  return s.eta_max - 0.5 * (s.eta_max - s.eta_min) * (1.0 - std::cos(progress * std::numbers::pi * s.phi));
}

}  // namespace otdebias::loss
