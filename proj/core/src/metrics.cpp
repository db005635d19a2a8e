#include "otdebias/metrics.hpp"

#include <cmath>

#include "otdebias/error.hpp"
#include "otdebias/stats.hpp"

namespace otdebias::metrics {

namespace {

constexpr std::array<double, 5> kBinEdges{0.0, 0.5, 1.0, 1.5, 2.0};
constexpr std::array<const char*, 4> kBinLabels{"0.0-0.5", "0.5-1.0", "1.0-1.5", "1.5-2.0"};

std::size_t bin_of(double z) {
  for (std::size_t b = 0; b < 3; ++b) {
    if (z < kBinEdges[b + 1]) return b;
  }
  return 3;
}

}  // namespace

double z_norm(double z) {
  if (!(z > -1.0)) throw DataError("redshift must exceed -1");
  return std::log1p(z);
}

MetricsReport compute_metrics(std::span<const double> z_pred, std::span<const double> z_true, double outlier_thresh) {
  if (z_pred.size() != z_true.size()) throw ShapeError("prediction and truth lengths differ");
  if (!(outlier_thresh >= 0.0)) throw ParameterError("outlier threshold must be nonnegative");

  MetricsReport r;
  std::array<double, 4> bin_sq{}, bin_res{};
  double sq = 0.0, res = 0.0;
  std::size_t outliers = 0;
  for (std::size_t i = 0; i < z_true.size(); ++i) {
    const double z = z_true[i], zh = z_pred[i];
    if (!std::isfinite(z) || !std::isfinite(zh)) throw DataError("redshifts must be finite");
    if (z < kBinEdges.front() || z > kBinEdges.back() || zh < kBinEdges.front() || zh > kBinEdges.back()) {
      ++r.n_filtered;
      continue;
    }
    const double d = std::log1p(zh) - std::log1p(z);
    const std::size_t b = bin_of(z);
    sq += d * d;
    res += zh - z;
    bin_sq[b] += d * d;
    bin_res[b] += zh - z;
    ++r.per_bin[b].n;
    if (std::abs(zh - z) / (1.0 + z) > outlier_thresh) ++outliers;
    ++r.n_samples;
  }
  if (r.n_samples == 0) throw DataError("no rows to evaluate");

  const double n = static_cast<double>(r.n_samples);
  r.log_mse = sq / n;
  r.bias = res / n;
  r.outlier_rate = static_cast<double>(outliers) / n;
  for (std::size_t b = 0; b < 4; ++b) {
    auto& s = r.per_bin[b];
    s.label = kBinLabels[b];
    s.lo = kBinEdges[b];
    s.hi = kBinEdges[b + 1];
    if (s.n > 0) {
      s.log_mse = bin_sq[b] / static_cast<double>(s.n);
      s.bias = bin_res[b] / static_cast<double>(s.n);
    }
  }
  return r;
}

MetricsReport compute_metrics(const std::vector<io::CatalogRow>& rows, double outlier_thresh) {
  if (rows.empty()) throw DataError("no rows to evaluate");
  std::vector<double> zp, zt;
  zp.reserve(rows.size());
  zt.reserve(rows.size());
  for (const auto& row : rows) {
    if (!row.z_pred) throw DataError("row '" + row.id + "' has no z_pred");
    zp.push_back(*row.z_pred);
    zt.push_back(row.z_true);
  }
  return compute_metrics(zp, zt, outlier_thresh);
}

double relative_improvement(double baseline, double treated) {
  if (baseline == 0.0) throw ParameterError("baseline must be nonzero");
  return 100.0 * (baseline - treated) / baseline;
}

double coefficient_of_variation(std::span<const double> values) { return coefficient_of_variation_percent(values); }

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ShapeError("label lists differ in length");
  if (pred.empty()) throw DataError("no labels to compare");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

Table3 table3(std::span<const double> z_true, const std::array<std::vector<double>, 4>& predictions,
              double outlier_thresh) {
  Table3 t;
  for (std::size_t k = 0; k < 4; ++k) t.reports[k] = compute_metrics(predictions[k], z_true, outlier_thresh);
  return t;
}

}  // namespace otdebias::metrics
