#include "otdebias/stats.hpp"

#include <cmath>

#include "otdebias/error.hpp"

namespace otdebias {

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double population_stddev(std::span<const double> values) {
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double coefficient_of_variation_percent(std::span<const double> values) {
  if (values.size() < 2) throw ParameterError("coefficient of variation needs at least 2 values");
  const double m = mean(values);
  if (m == 0.0) throw ParameterError("coefficient of variation undefined for zero mean");
  return 100.0 * population_stddev(values) / m;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw ShapeError("pearson needs equal, nonempty samples");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson undefined for a constant sample");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace otdebias
