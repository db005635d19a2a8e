#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "otdebias/catalog.hpp"
#include "otdebias/losses.hpp"
#include "otdebias/metrics.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/transport.hpp"

namespace otdebias::biaslab {

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.5;
  double sd = 0.2;
};

/// Gaussian mixture in z truncated to [z_lo, z_hi], with color g - r = c0 + c1 z + c_sd N(0, 1).
struct MixtureSpec {
  std::vector<MixtureComponent> components{{0.45, 0.35, 0.18}, {0.35, 0.85, 0.25}, {0.20, 1.40, 0.30}};
  double z_lo = 0.0;
  double z_hi = 2.0;
  double c0 = 0.4;
  double c1 = 0.5;
  double c_sd = 0.15;

  void validate() const;
};

enum class SelectionKind {
  none,
  /// 1 / (1 + exp(k (z - z0))): faint, distant galaxies drop out.
  logistic,
  /// floor + (1 - floor) / (1 + exp(-k_c (c - c0))): redder galaxies are kept more often.
  color_gated,
  /// logistic * color_gated.
  product,
  /// 1 for z < z_cut, else 0. The only kind that may return 0.
  step,
};

struct SelectionFn {
  SelectionKind kind = SelectionKind::none;
  double z0 = 0.8;
  double k = 6.0;
  double c0 = 0.8;
  double k_c = 6.0;
  double floor = 0.05;
  double z_cut = 1.0;

  double operator()(double z, double c) const;
  void validate() const;
  std::string describe() const;
};

/// Parses "none", "logistic:z0=0.8,k=6", "color:c0=0.8,k=6,floor=0.05", "product:..." or "step:z_cut=1".
SelectionFn parse_selection(const std::string& text);

struct SyntheticCatalog {
  /// Every candidate draw; `observed` marks the ones the selection accepted.
  std::vector<io::CatalogRow> rows;
  transport::Histogram true_dist;
  transport::Histogram observed_dist;
  std::uint64_t seed = 0;
  std::size_t n_accepted = 0;
};

/// Draws n candidates (z, c) from the mixture and accepts each with probability S(z, c).
/// Throws DegenerateSelectionError when fewer than 1e-3 of the candidates are accepted.
SyntheticCatalog sample_catalog(const MixtureSpec& mix, const SelectionFn& selection, std::size_t n, Rng& rng,
                                const transport::HKConfig& binning = {});

/// Histograms of the z_true column over all rows and over the observed rows.
transport::Histogram population_histogram(const std::vector<io::CatalogRow>& rows,
                                          const transport::HKConfig& binning = {});
transport::Histogram observed_histogram(const std::vector<io::CatalogRow>& rows,
                                        const transport::HKConfig& binning = {});

/// Largest gap between the two cumulative distributions, evaluated at bin edges.
double ks_statistic(const transport::Histogram& a, const transport::Histogram& b);

struct RecalibrateOptions {
  int steps = 500;
  double lr = 0.05;
  /// Halve the step until the loss decreases (at most 30 halvings).
  bool line_search = true;
  /// Log-mass floor applied to empty bins of the starting histogram.
  double floor = 1e-12;
};

struct RecalibrateResult {
  transport::Histogram recovered;
  /// HK loss before any step, then after every step taken.
  std::vector<double> loss_trace;
  int steps_taken = 0;
  /// The loss rose for 10 consecutive steps.
  bool failed = false;
};

/// Mirror descent on the probability simplex: the histogram is softmax(theta) and every step
/// subtracts lr * dHK/dp from theta, so each iterate is a valid histogram.
RecalibrateResult hk_recalibrate(const transport::Histogram& observed, const transport::Histogram& target,
                                 const transport::HKConfig& cfg = {}, const RecalibrateOptions& options = {});

/// Weighted pool-adjacent-violators: the non-decreasing sequence closest to `values` in the
/// weighted least-squares sense. Zero-weight entries take the value of their left neighbour.
std::vector<double> isotonic_fit(const std::vector<double>& values, const std::vector<double>& weights);

enum class AblationMode { mse_only, color, hk, color_hk };
inline constexpr std::array<AblationMode, 4> kAblationModes{AblationMode::mse_only, AblationMode::color,
                                                           AblationMode::hk, AblationMode::color_hk};
std::string mode_label(AblationMode mode);

struct AblationConfig {
  /// Number of quantile bins of training color; the color-band thresholds are added as extra edges.
  std::size_t color_bins = 16;
  double hk_weight = 1.0;
  /// Soft-histogram bandwidth; 0 means one bin width.
  double bandwidth = 0.0;
  int max_steps = 300;
  double lr = 0.5;
  double step_tol = 1e-10;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 11;
  transport::HKConfig hk{};
  loss::ColorBands bands{};
  double outlier_thresh = metrics::kDefaultOutlierThreshold;
};

struct PairedComparison {
  /// Mean over resamples of log_mse(mode) - log_mse(mse_only).
  double mean_diff = 0.0;
  double std_diff = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  /// The 95% interval excludes zero by more than floating-point noise.
  bool significant = false;
};

struct ColorModel {
  /// Interior bin edges in color; bin b covers [edges[b-1], edges[b]).
  std::vector<double> edges;
  /// Predicted log(1 + z) per bin, non-decreasing.
  std::vector<double> values;

  double predict(double g_r) const;
};

struct AblationReport {
  std::array<std::string, 4> labels;
  std::array<metrics::MetricsReport, 4> reports;
  std::array<ColorModel, 4> models;
  /// Paired bootstrap against mse_only; entry 0 compares mse_only with itself.
  std::array<PairedComparison, 4> versus_baseline;
  std::array<int, 4> steps{};
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
};

/// Fits the isotonic color predictor on the observed rows under each loss mode and evaluates it on
/// every row. The HK term compares the model's predictive distribution (bin value plus the bin's
/// training residuals) over all rows with `target`, both smoothed by the same Gaussian kernel.
/// Rows without g_r raise DataError; rows without an `observed` flag count as observed.
AblationReport ablation_run(const std::vector<io::CatalogRow>& rows, const std::vector<double>& target_z,
                            const AblationConfig& cfg = {});

/// Target taken from the z_true column of all rows.
AblationReport ablation_run(const std::vector<io::CatalogRow>& rows, const AblationConfig& cfg = {});

}  // namespace otdebias::biaslab
