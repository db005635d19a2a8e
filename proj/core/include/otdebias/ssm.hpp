#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "otdebias/rng.hpp"
#include "otdebias/tensor.hpp"

namespace otdebias::ssm {

/// Diagonal state-space parameters, one scalar of each per channel.
struct SSMParams {
  std::vector<double> A;  // <= 0
  std::vector<double> B;
  std::vector<double> C;
  std::vector<double> D;
  double taylor_eps = 1e-6;

  std::size_t channels() const { return A.size(); }
  /// Throws ParameterError unless all vectors share one length, A <= 0 and eps > 0.
  void validate() const;

  static SSMParams uniform(std::size_t channels, double a, double b, double c, double d, double eps = 1e-6);
};

struct Discretized {
  double a_bar = 0.0;
  double b_bar = 0.0;
};

/// Zero-order-hold discretization: a_bar = exp(dA), b_bar = (exp(dA) - 1) / (dA) * d * B.
/// For |dA| < eps the ratio is replaced by its expansion 1 + dA/2, which keeps the
/// switch continuous to O(eps^2).
Discretized discretize(double A, double B, double delta, double eps);

/// Dense affine map y = W x + b with W of shape out x in.
struct Linear {
  Tensor weight;
  std::vector<double> bias;

  std::size_t in_features() const { return weight.extent(1); }
  std::size_t out_features() const { return weight.extent(0); }
  void apply(std::span<const double> x, std::span<double> y) const;

  static Linear zeros(std::size_t in, std::size_t out);
  /// Weights and bias drawn from uniform(-1/sqrt(in), 1/sqrt(in)).
  static Linear seeded_uniform(std::size_t in, std::size_t out, Rng& rng);
};

double softplus(double x);
double sigmoid(double x);

/// Divides each row of a positive T x D tensor by its geometric mean:
/// exp(log d - mean(log d)) along the feature axis.
Tensor geometric_normalize(const Tensor& delta_raw);

/// Selective step sizes: geometric_normalize(softplus(proj(x_t))) for each row of x.
Tensor selective_delta(const Tensor& x_seq, const Linear& proj);

struct ScanResult {
  Tensor y;              // T x D
  Tensor final_state;    // D
};

/// Sequential scan h_t = a_bar(d_t) h_{t-1} + b_bar(d_t) x_t, y_t = C h_t + D x_t, h_0 = 0.
ScanResult scan(const Tensor& x_seq, const SSMParams& params, const Tensor& delta_seq);

enum class ScanDirection { row_major, reverse_row_major, column_major, reverse_column_major };

inline constexpr std::array<ScanDirection, 4> kScanDirections = {
    ScanDirection::row_major, ScanDirection::reverse_row_major, ScanDirection::column_major,
    ScanDirection::reverse_column_major};

/// Flat grid positions (row * cols + col) in the order a direction visits them.
std::vector<std::size_t> scan_order(ScanDirection direction, std::size_t rows, std::size_t cols);

struct DirectionalScanConfig {
  SSMParams params;
  /// Produces the selective step sizes; unset means a unit step everywhere.
  std::optional<Linear> delta_proj;
  /// Directional bias added to every sequence element before scanning, one D-vector per direction.
  std::array<std::vector<double>, 4> bias;

  static DirectionalScanConfig zero_bias(SSMParams params);
};

/// Scans an 8 x 8 x D grid along the four directions and returns 8 x 8 x 4D, direction-major
/// along the feature axis.
Tensor scan_4dir(const Tensor& grid, const DirectionalScanConfig& config);

/// Splits the 4D feature axis of scan_4dir output into four 8 x 8 x D tensors.
std::array<Tensor, 4> split_directions(const Tensor& scanned);

/// g = sigmoid(Wg [d1;d2;d3;d4]), y = (Wc [d1;d2;d3;d4]) * g. All inputs share one shape whose
/// last axis holds features; the output replaces that axis with Wc's output width.
Tensor gated_aggregate(std::span<const Tensor> directions, const Linear& wg, const Linear& wc);

/// out = g * y + (1 - g) * x.
Tensor residual_fuse(const Tensor& x, const Tensor& y, double gate);

}  // namespace otdebias::ssm
