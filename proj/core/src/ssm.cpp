#include "otdebias/ssm.hpp"

#include <algorithm>
#include <cmath>

#include "otdebias/error.hpp"
#include "otdebias/parallel.hpp"

namespace otdebias::ssm {

void SSMParams::validate() const {
  const std::size_t d = A.size();
  if (d == 0) throw ParameterError("SSM needs at least one channel");
  if (B.size() != d || C.size() != d || D.size() != d) throw ParameterError("SSM parameter lengths differ");
  for (double a : A) {
    if (!(a <= 0.0)) throw ParameterError("SSM A must be <= 0 elementwise");
  }
  if (!(taylor_eps > 0.0)) throw ParameterError("SSM taylor_eps must be positive");
}

SSMParams SSMParams::uniform(std::size_t channels, double a, double b, double c, double d, double eps) {
  return SSMParams{std::vector<double>(channels, a), std::vector<double>(channels, b),
                   std::vector<double>(channels, c), std::vector<double>(channels, d), eps};
}

Discretized discretize(double A, double B, double delta, double eps) {
  const double x = delta * A;
  const double a_bar = std::exp(x);
  const double ratio = std::abs(x) >= eps ? std::expm1(x) / x : 1.0 + 0.5 * x;
  return {a_bar, ratio * delta * B};
}

void Linear::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t in = in_features(), out = out_features();
  if (x.size() != in || y.size() != out) throw ShapeError("linear map dimension mismatch");
  for (std::size_t o = 0; o < out; ++o) {
    double acc = bias[o];
    for (std::size_t i = 0; i < in; ++i) acc += weight(o, i) * x[i];
    y[o] = acc;
  }
}

Linear Linear::zeros(std::size_t in, std::size_t out) { return Linear{Tensor({out, in}, 0.0), std::vector<double>(out, 0.0)}; }

Linear Linear::seeded_uniform(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l = zeros(in, out);
  for (double& w : l.weight.data()) w = rng.uniform(-bound, bound);
  for (double& b : l.bias) b = rng.uniform(-bound, bound);
  return l;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor geometric_normalize(const Tensor& delta_raw) {
  if (delta_raw.rank() != 2) throw ShapeError("step sizes must be T x D");
  const std::size_t t = delta_raw.extent(0), d = delta_raw.extent(1);
  Tensor out({t, d}, 0.0);
  std::vector<double> logs(d);
  for (std::size_t r = 0; r < t; ++r) {
    double mean_log = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double v = delta_raw(r, c);
      if (!(v > 0.0)) throw DataError("step sizes must be positive");
      logs[c] = std::log(v);
      mean_log += logs[c];
    }
    mean_log /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) out(r, c) = std::exp(logs[c] - mean_log);
  }
  return out;
}

Tensor selective_delta(const Tensor& x_seq, const Linear& proj) {
  if (x_seq.rank() != 2) throw ShapeError("sequence must be T x D");
  const std::size_t t = x_seq.extent(0), d = x_seq.extent(1);
  if (proj.in_features() != d) throw ShapeError("step projection input width differs from sequence width");
  const std::size_t out_d = proj.out_features();
  Tensor raw({t, out_d}, 0.0);
  for (std::size_t r = 0; r < t; ++r) {
    auto row = raw.data().subspan(r * out_d, out_d);
    proj.apply(x_seq.data().subspan(r * d, d), row);
    for (double& v : row) v = softplus(v);
  }
  return geometric_normalize(raw);
}

ScanResult scan(const Tensor& x_seq, const SSMParams& params, const Tensor& delta_seq) {
  params.validate();
  if (x_seq.rank() != 2) throw ShapeError("sequence must be T x D");
  if (delta_seq.shape() != x_seq.shape()) throw ShapeError("step sizes and sequence differ in shape");
  const std::size_t t = x_seq.extent(0), d = x_seq.extent(1);
  if (d != params.channels()) throw ShapeError("sequence width differs from SSM channel count");

  ScanResult result{Tensor({t, d}, 0.0), Tensor({d}, 0.0)};
  std::vector<double> h(d, 0.0);
  for (std::size_t step = 0; step < t; ++step) {
    for (std::size_t c = 0; c < d; ++c) {
      const double delta = delta_seq(step, c);
      if (!(delta > 0.0)) throw DataError("step sizes must be positive");
      const auto [a_bar, b_bar] = discretize(params.A[c], params.B[c], delta, params.taylor_eps);
      const double x = x_seq(step, c);
      h[c] = a_bar * h[c] + b_bar * x;
      result.y(step, c) = params.C[c] * h[c] + params.D[c] * x;
    }
  }
  for (std::size_t c = 0; c < d; ++c) result.final_state[c] = h[c];
  return result;
}

std::vector<std::size_t> scan_order(ScanDirection direction, std::size_t rows, std::size_t cols) {
  std::vector<std::size_t> order;
  order.reserve(rows * cols);
  switch (direction) {
    case ScanDirection::row_major:
    case ScanDirection::reverse_row_major:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) order.push_back(r * cols + c);
      break;
    case ScanDirection::column_major:
    case ScanDirection::reverse_column_major:
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows; ++r) order.push_back(r * cols + c);
      break;
  }
  if (direction == ScanDirection::reverse_row_major || direction == ScanDirection::reverse_column_major) {
    std::reverse(order.begin(), order.end());
  }
  return order;
}

DirectionalScanConfig DirectionalScanConfig::zero_bias(SSMParams params) {
  DirectionalScanConfig cfg;
  const std::size_t d = params.channels();
  cfg.params = std::move(params);
  for (auto& b : cfg.bias) b.assign(d, 0.0);
  return cfg;
}

Tensor scan_4dir(const Tensor& grid, const DirectionalScanConfig& config) {
  if (grid.rank() != 3 || grid.extent(0) != 8 || grid.extent(1) != 8) {
    throw ShapeError("scan_4dir expects an 8 x 8 x D grid");
  }
  const std::size_t rows = 8, cols = 8, d = grid.extent(2), n = rows * cols;
  config.params.validate();
  if (config.params.channels() != d) throw ShapeError("grid width differs from SSM channel count");
  for (const auto& b : config.bias) {
    if (b.size() != d) throw ShapeError("directional bias must have one entry per channel");
  }

  Tensor out({rows, cols, 4 * d}, 0.0);
  parallel_for(4, [&](std::size_t k) {
    const auto order = scan_order(kScanDirections[k], rows, cols);
    Tensor seq({n, d}, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t c = 0; c < d; ++c) seq(s, c) = grid[order[s] * d + c] + config.bias[k][c];
    }
    const Tensor delta = config.delta_proj ? selective_delta(seq, *config.delta_proj) : Tensor({n, d}, 1.0);
    const auto result = scan(seq, config.params, delta);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t c = 0; c < d; ++c) out[order[s] * 4 * d + k * d + c] = result.y(s, c);
    }
  });
  return out;
}

std::array<Tensor, 4> split_directions(const Tensor& scanned) {
  if (scanned.rank() != 3 || scanned.extent(2) % 4 != 0) throw ShapeError("expected an H x W x 4D tensor");
  const std::size_t h = scanned.extent(0), w = scanned.extent(1), d = scanned.extent(2) / 4;
  std::array<Tensor, 4> parts;
  for (std::size_t k = 0; k < 4; ++k) {
    parts[k] = Tensor({h, w, d}, 0.0);
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t c = 0; c < d; ++c) parts[k][p * d + c] = scanned[p * 4 * d + k * d + c];
  }
  return parts;
}

Tensor gated_aggregate(std::span<const Tensor> directions, const Linear& wg, const Linear& wc) {
  if (directions.size() != 4) throw ShapeError("gated_aggregate takes exactly four directional streams");
  const Shape& shape = directions[0].shape();
  for (const auto& d : directions) {
    if (d.shape() != shape) throw ShapeError("directional streams differ in shape");
  }
  const std::size_t d = shape.back();
  const std::size_t positions = directions[0].size() / d;
  if (wg.in_features() != 4 * d || wc.in_features() != 4 * d) throw ShapeError("aggregation maps expect 4D inputs");
  if (wg.out_features() != wc.out_features()) throw ShapeError("gate and content maps differ in output width");
  const std::size_t out_d = wc.out_features();

  Shape out_shape = shape;
  out_shape.back() = out_d;
  Tensor out(out_shape, 0.0);
  std::vector<double> concat(4 * d), gate(out_d), content(out_d);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t c = 0; c < d; ++c) concat[k * d + c] = directions[k][p * d + c];
    wg.apply(concat, gate);
    wc.apply(concat, content);
    for (std::size_t o = 0; o < out_d; ++o) out[p * out_d + o] = content[o] * sigmoid(gate[o]);
  }
  return out;
}

Tensor residual_fuse(const Tensor& x, const Tensor& y, double gate) {
  if (x.shape() != y.shape()) throw ShapeError("residual operands differ in shape");
  if (!(gate >= 0.0 && gate <= 1.0)) throw ParameterError("residual gate must lie in [0, 1]");
  Tensor out(x.shape(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gate * y[i] + (1.0 - gate) * x[i];
  return out;
}

}  // namespace otdebias::ssm
