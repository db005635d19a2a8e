#pragma once

#include <span>

namespace otdebias {

double mean(std::span<const double> values);

/// Standard deviation with the 1/N (population) convention.
double population_stddev(std::span<const double> values);

/// 100 * population std / mean. Needs >= 2 values and a nonzero mean.
double coefficient_of_variation_percent(std::span<const double> values);

/// Pearson correlation of two equally sized samples.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace otdebias
