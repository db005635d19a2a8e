#include "otdebias/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otdebias/error.hpp"

namespace otdebias::transport {

namespace {

constexpr double kMassTol = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_marginal(std::span<const double> m, const char* name) {
  if (m.empty()) throw DataError(std::string("marginal ") + name + " is empty");
  double total = 0.0;
  for (double v : m) {
    if (!std::isfinite(v) || v < 0.0) throw DataError(std::string("marginal ") + name + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kMassTol) {
    throw DataError(std::string("marginal ") + name + " is not normalized (sum " + std::to_string(total) + ")");
  }
}

std::vector<double> safe_log(std::span<const double> m) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] > 0.0 ? std::log(m[i]) : kNegInf;
  return out;
}

// log(sum exp(terms)) over a buffer, ignoring -inf entries.
double log_sum_exp(std::span<const double> terms) {
  double mx = kNegInf;
  for (double t : terms) mx = std::max(mx, t);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) {
    if (t != kNegInf) s += std::exp(t - mx);
  }
  return mx + std::log(s);
}

void check_same_binning(const Histogram& p, const Histogram& q) {
  if (p.edges.size() != q.edges.size() || p.mass.size() != q.mass.size()) {
    throw DataError("histograms use different binnings");
  }
  for (std::size_t i = 0; i < p.edges.size(); ++i) {
    if (std::abs(p.edges[i] - q.edges[i]) > 1e-12) throw DataError("histograms use different binnings");
  }
}

std::vector<double> sqrt_renormalized(const std::vector<double>& mass) {
  std::vector<double> out(mass.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) total += out[i] = std::sqrt(mass[i]);
  for (double& v : out) v /= total;
  return out;
}

struct Debiased {
  double transport = 0.0;
  TransportPlan pq, qp, pp, qq;
};

Debiased debiased_transport(std::span<const double> p, std::span<const double> q, const Tensor& cost,
                            const SinkhornOptions& opts) {
  Debiased d{0.0, sinkhorn(p, q, cost, opts), sinkhorn(q, p, cost, opts), sinkhorn(p, p, cost, opts),
             sinkhorn(q, q, cost, opts)};
  // Both sums are commutative, so swapping p and q reproduces the value bit for bit.
  d.transport = 0.5 * (d.pq.entropic_cost + d.qp.entropic_cost) - 0.5 * (d.pp.entropic_cost + d.qq.entropic_cost);
  return d;
}

SinkhornOptions options_from(const HKConfig& cfg) { return {cfg.eps_entropic, cfg.stop_tol, cfg.max_iter}; }

}  // namespace

void HKConfig::validate() const {
  if (n_bins < 2) throw ParameterError("HK histogram needs at least 2 bins");
  if (!(z_hi > z_lo)) throw ParameterError("HK range must satisfy z_lo < z_hi");
  if (!(eps_entropic > 0.0) || !(stop_tol > 0.0) || max_iter < 1) {
    throw ParameterError("Sinkhorn eps, tolerance and iteration cap must be positive");
  }
  if (!(delta >= 0.0)) throw ParameterError("HK delta must be nonnegative");
}

std::vector<double> Histogram::centers() const {
  std::vector<double> c(mass.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (edges[i] + edges[i + 1]);
  return c;
}

double Histogram::total() const {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

std::vector<double> uniform_edges(std::size_t n, double lo, double hi) {
  if (n == 0 || !(hi > lo)) throw ParameterError("uniform_edges needs n >= 1 and lo < hi");
  std::vector<double> edges(n + 1);
  for (std::size_t i = 0; i <= n; ++i) edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  edges.back() = hi;
  return edges;
}

Histogram make_histogram(std::vector<double> edges, std::vector<double> mass) {
  if (edges.size() != mass.size() + 1 || mass.empty()) throw DataError("histogram needs n + 1 edges for n bins");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw DataError("histogram edges must be strictly increasing");
  }
  check_marginal(mass, "histogram");
  return Histogram{std::move(edges), std::move(mass), 0};
}

Histogram histogram(std::span<const double> values, const HKConfig& cfg) {
  if (values.empty()) throw DataError("cannot histogram an empty sample");
  if (cfg.n_bins < 1 || !(cfg.z_hi > cfg.z_lo)) throw ParameterError("invalid histogram binning");
  Histogram h;
  h.edges = uniform_edges(cfg.n_bins, cfg.z_lo, cfg.z_hi);
  std::vector<std::size_t> counts(cfg.n_bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("cannot histogram non-finite values");
    std::size_t bin;
    if (v < cfg.z_lo) {
      bin = 0;
      ++h.n_clamped;
    } else if (v > cfg.z_hi) {
      bin = cfg.n_bins - 1;
      ++h.n_clamped;
    } else {
      // First edge strictly greater than v; the closed upper end falls into the last bin.
      const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
      bin = std::min<std::size_t>(static_cast<std::size_t>(it - h.edges.begin()) - 1, cfg.n_bins - 1);
    }
    ++counts[bin];
  }
  h.mass.resize(cfg.n_bins);
  for (std::size_t i = 0; i < cfg.n_bins; ++i) {
    h.mass[i] = static_cast<double>(counts[i]) / static_cast<double>(values.size());
  }
  return h;
}

Tensor squared_distance_cost(std::span<const double> centers) {
  const std::size_t n = centers.size();
  Tensor c({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = (centers[i] - centers[j]) * (centers[i] - centers[j]);
  return c;
}

TransportPlan sinkhorn(std::span<const double> a, std::span<const double> b, const Tensor& cost,
                       const SinkhornOptions& options) {
  check_marginal(a, "a");
  check_marginal(b, "b");
  const std::size_t n = a.size(), m = b.size();
  if (cost.rank() != 2 || cost.extent(0) != n || cost.extent(1) != m) throw ShapeError("cost must be |a| x |b|");
  for (double c : cost.data()) {
    if (c < 0.0) throw DataError("transport cost must be nonnegative");
  }
  if (!(options.eps > 0.0) || !(options.stop_tol > 0.0) || options.max_iter < 1) {
    throw ParameterError("Sinkhorn eps, tolerance and iteration cap must be positive");
  }

  if (!(options.relaxation >= 1.0 && options.relaxation < 2.0)) {
    throw ParameterError("Sinkhorn relaxation must lie in [1, 2)");
  }

  const double eps = options.eps;
  const auto log_a = safe_log(a), log_b = safe_log(b);
  std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
  std::vector<double> best_f, best_g;
  double best_err = std::numeric_limits<double>::infinity();

  TransportPlan out;
  out.eps_entropic = eps;
  out.cost = cost;

  auto violation = [&] {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (log_a[i] == kNegInf) continue;
      for (std::size_t j = 0; j < m; ++j) buf[j] = log_b[j] + (f[i] + g[j] - cost(i, j)) / eps;
      err = std::max(err, std::abs(std::exp(log_a[i] + log_sum_exp(std::span(buf.data(), m))) - a[i]));
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (log_b[j] == kNegInf) continue;
      for (std::size_t i = 0; i < n; ++i) buf[i] = log_a[i] + (f[i] + g[j] - cost(i, j)) / eps;
      err = std::max(err, std::abs(std::exp(log_b[j] + log_sum_exp(std::span(buf.data(), n))) - b[j]));
    }
    return err;
  };

  for (int it = 1; it <= options.max_iter; ++it) {
    const double w = it == 1 ? 1.0 : options.relaxation;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) buf[j] = log_b[j] + (g[j] - cost(i, j)) / eps;
      f[i] = (1.0 - w) * f[i] - w * eps * log_sum_exp(std::span(buf.data(), m));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = log_a[i] + (f[i] - cost(i, j)) / eps;
      g[j] = (1.0 - w) * g[j] - w * eps * log_sum_exp(std::span(buf.data(), n));
    }
    out.iterations_used = it;
    const double err = violation();
    out.raw_err_trace.push_back(err);
    if (err < best_err) {
      best_err = err;
      best_f = f;
      best_g = g;
    }
    out.err_trace.push_back(best_err);
    if (best_err < options.stop_tol) {
      out.converged = true;
      break;
    }
  }
  f = std::move(best_f);
  g = std::move(best_g);
  out.marginal_err = best_err;

  out.plan = Tensor({n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (log_a[i] == kNegInf || log_b[j] == kNegInf) continue;
      const double t = std::exp(log_a[i] + log_b[j] + (f[i] + g[j] - cost(i, j)) / eps);
      out.plan(i, j) = t;
      out.transport_cost += t * cost(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) out.entropic_cost += f[i] * a[i];
  for (std::size_t j = 0; j < m; ++j) out.entropic_cost += g[j] * b[j];
  out.f = std::move(f);
  out.g = std::move(g);
  return out;
}

double hellinger_sq(const Histogram& p, const Histogram& q) {
  check_same_binning(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    const double d = std::sqrt(p.mass[i]) - std::sqrt(q.mass[i]);
    s += d * d;
  }
  return 2.0 * s;
}

HKResult hk_distance_sq(const Histogram& p, const Histogram& q, const HKConfig& cfg, HKForm form) {
  cfg.validate();
  check_same_binning(p, q);
  check_marginal(p.mass, "p");
  check_marginal(q.mass, "q");

  const Tensor cost = squared_distance_cost(p.centers());
  const std::vector<double> pm = form == HKForm::density ? p.mass : sqrt_renormalized(p.mass);
  const std::vector<double> qm = form == HKForm::density ? q.mass : sqrt_renormalized(q.mass);
  const auto d = debiased_transport(pm, qm, cost, options_from(cfg));

  HKResult r;
  r.hellinger = hellinger_sq(p, q);
  r.transport = d.transport;
  r.hk2 = r.transport + cfg.delta * r.hellinger;
  // Adding the constant delta * H^2 to every cost entry shifts <T, C> by exactly that amount.
  r.raw_cost = d.pq.transport_cost + cfg.delta * r.hellinger;
  r.iterations = d.pq.iterations_used;
  r.marginal_err = std::max({d.pq.marginal_err, d.qp.marginal_err, d.pp.marginal_err, d.qq.marginal_err});
  r.converged = d.pq.converged && d.qp.converged && d.pp.converged && d.qq.converged;
  return r;
}

HKGradient hk_distance_sq_grad(const Histogram& p, const Histogram& q, const HKConfig& cfg) {
  cfg.validate();
  check_same_binning(p, q);
  check_marginal(p.mass, "p");
  check_marginal(q.mass, "q");

  const Tensor cost = squared_distance_cost(p.centers());
  const auto d = debiased_transport(p.mass, q.mass, cost, options_from(cfg));

  HKGradient out;
  out.value.hellinger = hellinger_sq(p, q);
  out.value.transport = d.transport;
  out.value.hk2 = d.transport + cfg.delta * out.value.hellinger;
  out.value.raw_cost = d.pq.transport_cost + cfg.delta * out.value.hellinger;
  out.value.iterations = d.pq.iterations_used;
  out.value.marginal_err = std::max({d.pq.marginal_err, d.qp.marginal_err, d.pp.marginal_err, d.qq.marginal_err});
  out.value.converged = d.pq.converged && d.qp.converged && d.pp.converged && d.qq.converged;

  const std::size_t n = p.bins();
  out.grad_p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // p enters OT(p,q) as the first marginal, OT(q,p) as the second, OT(p,p) as both.
    const double transport = 0.5 * (d.pq.f[i] + d.qp.g[i]) - 0.5 * (d.pp.f[i] + d.pp.g[i]);
    double hell;
    if (p.mass[i] > 0.0) {
      hell = 2.0 * (1.0 - std::sqrt(q.mass[i] / p.mass[i]));
    } else {
      hell = q.mass[i] > 0.0 ? -std::numeric_limits<double>::infinity() : 2.0;
    }
    out.grad_p[i] = transport + cfg.delta * hell;
  }
  return out;
}

SoftHistogram soft_histogram(std::span<const double> values, const std::vector<double>& edges, double bandwidth,
                             std::span<const double> weights) {
  if (!(bandwidth > 0.0)) throw ParameterError("soft histogram bandwidth must be positive");
  if (values.empty()) throw DataError("cannot histogram an empty sample");
  if (!weights.empty() && weights.size() != values.size()) throw ShapeError("one weight per sample required");
  if (edges.size() < 2) throw DataError("soft histogram needs at least one bin");

  const std::size_t n = edges.size() - 1, count = values.size();
  std::vector<double> centers(n);
  for (std::size_t j = 0; j < n; ++j) centers[j] = 0.5 * (edges[j] + edges[j + 1]);

  double total_w = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    const double w = weights.empty() ? 1.0 : weights[s];
    if (!(w >= 0.0)) throw DataError("sample weights must be nonnegative");
    total_w += w;
  }
  if (!(total_w > 0.0)) throw DataError("sample weights sum to zero");

  SoftHistogram out;
  out.rows = Tensor({count, n}, 0.0);
  std::vector<double> mass(n, 0.0), logw(n);
  const double inv_2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  for (std::size_t s = 0; s < count; ++s) {
    if (!std::isfinite(values[s])) throw DataError("soft histogram values must be finite");
    for (std::size_t j = 0; j < n; ++j) logw[j] = -(values[s] - centers[j]) * (values[s] - centers[j]) * inv_2h2;
    const double lse = log_sum_exp(logw);
    const double w = (weights.empty() ? 1.0 : weights[s]) / total_w;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = std::exp(logw[j] - lse);
      out.rows(s, j) = r;
      mass[j] += w * r;
    }
  }
  out.hist.edges = edges;
  out.hist.mass = std::move(mass);
  return out;
}

HKLoss hk_loss(std::span<const double> pred_z, const Histogram& target, const HKConfig& cfg, double bandwidth,
               std::span<const double> weights) {
  if (!(bandwidth > 0.0)) throw ParameterError("HK loss bandwidth must be positive");
  const auto soft = soft_histogram(pred_z, target.edges, bandwidth, weights);
  const auto g = hk_distance_sq_grad(soft.hist, target, cfg);

  const std::size_t count = pred_z.size(), n = target.bins();
  const auto centers = target.centers();
  double total_w = 0.0;
  for (std::size_t s = 0; s < count; ++s) total_w += weights.empty() ? 1.0 : weights[s];

  HKLoss out;
  out.loss = g.value.hk2;
  out.detail = g.value;
  out.grad.assign(count, 0.0);
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  for (std::size_t s = 0; s < count; ++s) {
    // d row_j / dz = row_j (e_j - sum_k row_k e_k) with e_j = -(z - c_j) / h^2.
    double e_bar = 0.0;
    for (std::size_t j = 0; j < n; ++j) e_bar += soft.rows(s, j) * (-(pred_z[s] - centers[j]) * inv_h2);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = soft.rows(s, j);
      if (r == 0.0) continue;
      acc += g.grad_p[j] * r * (-(pred_z[s] - centers[j]) * inv_h2 - e_bar);
    }
    out.grad[s] = (weights.empty() ? 1.0 : weights[s]) / total_w * acc;
  }
  out.predicted = soft.hist;
  return out;
}

}  // namespace otdebias::transport
