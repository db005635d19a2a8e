#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "otdebias/catalog.hpp"

namespace otdebias::metrics {

/// log(1 + z).
double z_norm(double z);

struct BinStats {
  std::string label;
  double lo = 0.0;
  double hi = 0.0;
  double log_mse = 0.0;
  double bias = 0.0;
  std::size_t n = 0;
};

struct MetricsReport {
  double log_mse = 0.0;
  double bias = 0.0;
  double outlier_rate = 0.0;
  /// Keyed by true z: [0, 0.5), [0.5, 1.0), [1.0, 1.5), [1.5, 2.0].
  std::array<BinStats, 4> per_bin;
  std::size_t n_samples = 0;
  /// Rows skipped because z_true or z_pred fell outside [0, 2].
  std::size_t n_filtered = 0;
};

inline constexpr double kDefaultOutlierThreshold = 0.15;

/// Log-MSE, mean signed residual and the fraction of rows with |zhat - z| / (1 + z) > threshold.
/// Every row needs z_pred. Throws DataError when no rows remain after range filtering.
MetricsReport compute_metrics(const std::vector<io::CatalogRow>& rows,
                              double outlier_thresh = kDefaultOutlierThreshold);

/// Same metrics from parallel arrays.
MetricsReport compute_metrics(std::span<const double> z_pred, std::span<const double> z_true,
                              double outlier_thresh = kDefaultOutlierThreshold);

/// 100 (baseline - treated) / baseline.
double relative_improvement(double baseline, double treated);

/// 100 * population std / mean.
double coefficient_of_variation(std::span<const double> values);

/// Percentage of positions where the labels agree.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Four configurations side by side, in the order mse-only, +color, +hk, +color+hk.
struct Table3 {
  std::array<std::string, 4> labels{"mse_only", "color", "hk", "color_hk"};
  std::array<MetricsReport, 4> reports;
};

Table3 table3(std::span<const double> z_true, const std::array<std::vector<double>, 4>& predictions,
              double outlier_thresh = kDefaultOutlierThreshold);

}  // namespace otdebias::metrics
