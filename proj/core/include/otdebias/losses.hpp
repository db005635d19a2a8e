#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "otdebias/rng.hpp"
#include "otdebias/tensor.hpp"

namespace otdebias::loss {

struct FocalResult {
  double loss = 0.0;
  /// d loss / d logits, where probs = softmax(logits).
  std::vector<double> grad_logits;
  /// Set when a probability had to be clamped to 1e-12 before taking its log.
  bool clamped = false;
};

/// -alpha_y (1 - p_y)^gamma log p_y for the true class y.
/// With `all_classes` the sum over every class, -sum_i alpha_i (1 - p_i)^gamma log p_i, is used instead.
/// `alpha` may be empty (all ones) or hold one weight per class.
FocalResult focal_loss(std::span<const double> probs, std::size_t label, std::span<const double> alpha, double gamma,
                       bool all_classes = false);

/// Same loss with probs = softmax(logits).
FocalResult focal_loss_logits(std::span<const double> logits, std::size_t label, std::span<const double> alpha,
                              double gamma, bool all_classes = false);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// gamma0 + eta * tanh((current - baseline) / baseline).
double adaptive_gamma(double l_current, double l_baseline, double gamma0 = 2.0, double eta = 1.0);

/// g-r intervals for the three quality tiers. A color on a shared boundary goes to the better tier.
struct ColorBands {
  double high_lo = 0.6;
  double high_hi = 1.2;
  double medium_lo = 0.3;
  double medium_hi = 1.5;
  double high = 1.0;
  double medium = 0.7;
  double low = 0.3;
};

double color_weight(double g_r, const ColorBands& bands = {});

struct PerSampleLoss {
  double loss = 0.0;
  std::vector<double> grad;
};

/// sum_i w_i (log(1 + zhat_i) - log(1 + z_i))^2 and its gradient in zhat. Empty w means all ones.
PerSampleLoss redshift_loss(std::span<const double> z_pred, std::span<const double> z_true,
                            std::span<const double> w = {});

/// Diagonal Gaussian posterior N(mu, sigma^2) and the LSI constant c = softplus(c_raw).
struct VIBState {
  std::vector<double> mu;
  std::vector<double> sigma;
  double c_raw = 0.0;

  void validate() const;
  double c() const;
};

struct VIBKL {
  double kl = 0.0;
  std::vector<double> grad_mu;
  std::vector<double> grad_sigma;
};

/// KL(N(mu, sigma^2) || N(0, I)) = 1/2 sum (mu^2 + sigma^2 - 1 - 2 log sigma).
VIBKL vib_kl(const VIBState& state);

/// mu + sigma * eps with eps ~ N(0, I).
Tensor reparameterize(const VIBState& state, Rng& rng);

struct LSIResult {
  double value = 0.0;
  double grad_kl = 0.0;
  double grad_c_raw = 0.0;
};

/// sqrt(softplus(c_raw) * kl). Both gradients are 0 at kl = 0.
LSIResult lsi_term(double kl, double c_raw);

enum class CurriculumMode { ramp, step };

struct LossConfig {
  double lambda_red = 0.5;
  double lambda_vib = 0.25;
  double lsi_weight = 0.12;
  double lambda_hk = 0.035;
  int hk_start_epoch = 2;
  int ramp_epochs = 10;
  CurriculumMode curriculum = CurriculumMode::ramp;
  double gamma0 = 2.0;
  double eta = 1.0;
  std::vector<double> alpha;

  void validate() const;
};

/// 0 before hk_start_epoch, then a linear ramp to lambda_hk over ramp_epochs (ramp mode)
/// or lambda_hk immediately (step mode). Always 0 during validation.
double hk_curriculum(int epoch, const LossConfig& cfg = {}, bool validation = false);

struct LossParts {
  double cls = 0.0;
  double red = 0.0;
  double kl = 0.0;
  double lsi = 0.0;
  double hk = 0.0;
};

struct LossBreakdown {
  double cls = 0.0;
  double red = 0.0;
  double vib = 0.0;
  double lsi = 0.0;
  double hk = 0.0;
  double lambda_hk = 0.0;
  double total = 0.0;
};

/// cls + lambda_red red + (lambda_vib kl + lsi_weight lsi) + lambda_hk(epoch) hk, term by term.
LossBreakdown loss_breakdown(const LossParts& parts, const LossConfig& cfg, int epoch, bool validation = false);

double total_loss(const LossParts& parts, const LossConfig& cfg = {}, int epoch = 0, bool validation = false);

}  // namespace otdebias::loss
