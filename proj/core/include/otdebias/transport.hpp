#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "otdebias/tensor.hpp"

namespace otdebias::transport {

/// Binning and solver settings for the Hellinger-Kantorovich distance.
struct HKConfig {
  std::size_t n_bins = 40;
  double z_lo = 0.0;
  double z_hi = 2.0;
  /// Entropic regularization of the transport term.
  double eps_entropic = 0.1;
  /// Sinkhorn stops once the largest row-marginal violation drops below this.
  double stop_tol = 1e-4;
  int max_iter = 50;
  /// Weight of the Hellinger term.
  double delta = 1.0;

  void validate() const;
  double bin_width() const { return (z_hi - z_lo) / static_cast<double>(n_bins); }
};

/// Binned probability mass over [edges.front(), edges.back()].
struct Histogram {
  std::vector<double> edges;  // n + 1, strictly increasing
  std::vector<double> mass;   // n, nonnegative
  /// Values that fell outside the edges and were assigned to an end bin.
  std::size_t n_clamped = 0;

  std::size_t bins() const { return mass.size(); }
  std::vector<double> centers() const;
  double total() const;
};

/// Edges lo + (hi - lo) * i / n for i = 0..n.
std::vector<double> uniform_edges(std::size_t n, double lo, double hi);

/// Validated histogram from explicit edges and mass; mass must sum to 1 within 1e-9.
Histogram make_histogram(std::vector<double> edges, std::vector<double> mass);

/// Normalized counts; bins are left-closed/right-open except the last, which is closed.
/// Out-of-range values are clamped to the end bins and counted in n_clamped.
Histogram histogram(std::span<const double> values, const HKConfig& cfg = {});

/// Squared distance between bin centers, n x n.
Tensor squared_distance_cost(std::span<const double> centers);

struct SinkhornOptions {
  double eps = 0.1;
  double stop_tol = 1e-4;
  int max_iter = 50;
  /// Over-relaxation weight for the potential updates, in [1, 2). 1 is plain Sinkhorn.
  double relaxation = 1.5;
};

/// Result of a log-domain Sinkhorn solve. The plan factorizes as
/// T_ij = a_i b_j exp((f_i + g_j - C_ij) / eps).
struct TransportPlan {
  Tensor plan;
  Tensor cost;
  double eps_entropic = 0.0;
  int iterations_used = 0;
  /// Largest absolute row or column violation of the returned plan.
  double marginal_err = 0.0;
  bool converged = false;
  /// <T, C>.
  double transport_cost = 0.0;
  /// Entropic objective <T, C> + eps KL(T | a x b), evaluated as <f, a> + <g, b>.
  double entropic_cost = 0.0;
  std::vector<double> f;
  std::vector<double> g;
  /// marginal_err after every iteration. The solver keeps the best iterate seen so far,
  /// so this trace never increases.
  std::vector<double> err_trace;
  /// Violation of the latest iterate after every iteration (over-relaxed steps can overshoot).
  std::vector<double> raw_err_trace;
};

/// Log-domain entropic optimal transport between mass vectors a and b, with over-relaxed
/// potential updates. The first iteration is a plain Sinkhorn step. Throws DataError if a
/// or b is negative or does not sum to 1 within 1e-9, or if the cost is not finite and
/// nonnegative. Running out of iterations is not an error: the plan comes back with
/// converged == false and the residual in marginal_err.
TransportPlan sinkhorn(std::span<const double> a, std::span<const double> b, const Tensor& cost,
                       const SinkhornOptions& options = {});

/// 2 * sum_i (sqrt(p_i) - sqrt(q_i))^2. Both histograms must share edges.
double hellinger_sq(const Histogram& p, const Histogram& q);

enum class HKForm {
  /// Transport between p and q.
  density,
  /// Transport between sqrt(p) and sqrt(q), each renormalized to unit mass.
  sqrt_density,
};

struct HKResult {
  /// transport + delta * hellinger.
  double hk2 = 0.0;
  /// Debiased entropic transport term, symmetrized over argument order.
  double transport = 0.0;
  /// Unweighted Hellinger term 2 sum (sqrt p - sqrt q)^2.
  double hellinger = 0.0;
  /// <T, C> of the (p, q) plan with C_ij = (c_i - c_j)^2 + delta * hellinger, before debiasing.
  double raw_cost = 0.0;
  int iterations = 0;
  double marginal_err = 0.0;
  bool converged = false;
};

/// Squared HK distance between two histograms on the same binning, bin positions at centers.
/// The transport term is OT(p,q) averaged over both argument orders minus
/// (OT(p,p) + OT(q,q)) / 2, which removes the entropic bias and makes the result symmetric.
HKResult hk_distance_sq(const Histogram& p, const Histogram& q, const HKConfig& cfg = {},
                        HKForm form = HKForm::density);

struct HKGradient {
  HKResult value;
  /// d hk2 / d p_i for the density form, defined up to an additive constant
  /// (only mass-preserving directions are meaningful). Bins with p_i = 0 < q_i get -inf.
  std::vector<double> grad_p;
};

HKGradient hk_distance_sq_grad(const Histogram& p, const Histogram& q, const HKConfig& cfg = {});

struct SoftHistogram {
  Histogram hist;
  /// Per-sample normalized Gaussian weights over bin centers, N x n.
  Tensor rows;
};

/// Each sample contributes exp(-(z - c_j)^2 / (2 h^2)) normalized over bins, weighted by
/// `weights` (uniform when empty).
SoftHistogram soft_histogram(std::span<const double> values, const std::vector<double>& edges, double bandwidth,
                             std::span<const double> weights = {});

struct HKLoss {
  double loss = 0.0;
  HKResult detail;
  /// d loss / d pred_z for each sample.
  std::vector<double> grad;
  Histogram predicted;
};

/// HK loss between the soft histogram of predictions and a target histogram, with the
/// analytic gradient through the soft binning and the transport dual potentials.
/// Predictions are not clamped; samples outside the binned range still weight the nearest bins.
HKLoss hk_loss(std::span<const double> pred_z, const Histogram& target, const HKConfig& cfg, double bandwidth,
               std::span<const double> weights = {});

}  // namespace otdebias::transport
