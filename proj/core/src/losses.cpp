#include "otdebias/losses.hpp"

#include <algorithm>
#include <cmath>

#include "otdebias/error.hpp"
#include "otdebias/ssm.hpp"

namespace otdebias::loss {

namespace {

constexpr double kProbFloor = 1e-12;

void check_distribution(std::span<const double> probs) {
  if (probs.empty()) throw DataError("class distribution is empty");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("class probabilities must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw DataError("class probabilities must sum to 1");
}

// Per-class term -alpha (1 - p)^gamma log p and its derivative in p.
struct FocalTerm {
  double value;
  double dp;
};

FocalTerm focal_term(double p, double alpha, double gamma, bool& clamped) {
  if (p < kProbFloor) {
    p = kProbFloor;
    clamped = true;
  }
  const double log_p = std::log(p);
  const double one_minus = 1.0 - p;
  const double mod = std::pow(one_minus, gamma);
  // d/dp (1 - p)^gamma; when p == 1 the log factor is 0 and the product is taken as 0.
  double dmod_logp = 0.0;
  if (gamma != 0.0 && log_p != 0.0) dmod_logp = -gamma * std::pow(one_minus, gamma - 1.0) * log_p;
  return {-alpha * mod * log_p, -alpha * (dmod_logp + mod / p)};
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw DataError("softmax of an empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += out[i] = std::exp(logits[i] - mx);
  for (double& v : out) v /= s;
  return out;
}

FocalResult focal_loss(std::span<const double> probs, std::size_t label, std::span<const double> alpha, double gamma,
                       bool all_classes) {
  check_distribution(probs);
  const std::size_t n = probs.size();
  if (label >= n) throw DataError("class label out of range");
  if (!alpha.empty() && alpha.size() != n) throw ShapeError("alpha needs one weight per class");
  if (!(gamma >= 0.0)) throw ParameterError("focal gamma must be nonnegative");

  FocalResult out;
  std::vector<double> dl_dp(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!all_classes && i != label) continue;
    const auto t = focal_term(probs[i], alpha.empty() ? 1.0 : alpha[i], gamma, out.clamped);
    out.loss += t.value;
    dl_dp[i] = t.dp;
  }
  // dp_i / dlogit_k = p_i (delta_ik - p_k).
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) weighted += dl_dp[i] * probs[i];
  out.grad_logits.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.grad_logits[k] = dl_dp[k] * probs[k] - probs[k] * weighted;
  return out;
}

FocalResult focal_loss_logits(std::span<const double> logits, std::size_t label, std::span<const double> alpha,
                              double gamma, bool all_classes) {
  const auto p = softmax(logits);
  return focal_loss(p, label, alpha, gamma, all_classes);
}

double adaptive_gamma(double l_current, double l_baseline, double gamma0, double eta) {
  if (!(l_baseline > 0.0)) throw ParameterError("baseline loss must be positive");
  if (!std::isfinite(l_current)) throw DataError("current loss must be finite");
  return gamma0 + eta * std::tanh((l_current - l_baseline) / l_baseline);
}

double color_weight(double g_r, const ColorBands& b) {
  if (std::isnan(g_r)) throw DataError("color is NaN");
  if (g_r >= b.high_lo && g_r <= b.high_hi) return b.high;
  if (g_r >= b.medium_lo && g_r <= b.medium_hi) return b.medium;
  return b.low;
}

PerSampleLoss redshift_loss(std::span<const double> z_pred, std::span<const double> z_true, std::span<const double> w) {
  if (z_pred.size() != z_true.size()) throw ShapeError("prediction and truth lengths differ");
  if (!w.empty() && w.size() != z_pred.size()) throw ShapeError("one weight per sample required");
  PerSampleLoss out;
  out.grad.resize(z_pred.size());
  for (std::size_t i = 0; i < z_pred.size(); ++i) {
    if (!(1.0 + z_pred[i] > 0.0) || !(1.0 + z_true[i] > 0.0)) throw DataError("redshift must exceed -1");
    const double wi = w.empty() ? 1.0 : w[i];
    const double r = std::log1p(z_pred[i]) - std::log1p(z_true[i]);
    out.loss += wi * r * r;
    out.grad[i] = 2.0 * wi * r / (1.0 + z_pred[i]);
  }
  return out;
}

void VIBState::validate() const {
  if (mu.empty() || mu.size() != sigma.size()) throw ShapeError("VIB mu and sigma must have equal nonzero length");
  for (double s : sigma) {
    if (!(s > 0.0)) throw ParameterError("VIB sigma must be positive");
  }
}

double VIBState::c() const { return ssm::softplus(c_raw); }

VIBKL vib_kl(const VIBState& state) {
  state.validate();
  VIBKL out;
  const std::size_t d = state.mu.size();
  out.grad_mu.resize(d);
  out.grad_sigma.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double m = state.mu[i], s = state.sigma[i];
    out.kl += 0.5 * (m * m + s * s - 1.0 - 2.0 * std::log(s));
    out.grad_mu[i] = m;
    out.grad_sigma[i] = s - 1.0 / s;
  }
  return out;
}

Tensor reparameterize(const VIBState& state, Rng& rng) {
  state.validate();
  std::vector<double> z(state.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = state.mu[i] + state.sigma[i] * rng.normal();
  const std::size_t n = z.size();
  return Tensor({n}, std::move(z));
}

LSIResult lsi_term(double kl, double c_raw) {
  if (!(kl >= 0.0)) throw ParameterError("KL must be nonnegative");
  LSIResult out;
  if (kl == 0.0) return out;
  const double c = ssm::softplus(c_raw);
  out.value = std::sqrt(c * kl);
  out.grad_kl = c / (2.0 * out.value);
  out.grad_c_raw = kl / (2.0 * out.value) * ssm::sigmoid(c_raw);
  return out;
}

void LossConfig::validate() const {
  if (!(lambda_red >= 0.0 && lambda_vib >= 0.0 && lsi_weight >= 0.0 && lambda_hk >= 0.0)) {
    throw ParameterError("loss weights must be nonnegative");
  }
  if (hk_start_epoch < 0) throw ParameterError("hk_start_epoch must be nonnegative");
  if (ramp_epochs < 0) throw ParameterError("ramp_epochs must be nonnegative");
}

double hk_curriculum(int epoch, const LossConfig& cfg, bool validation) {
  cfg.validate();
  if (epoch < 0) throw ParameterError("epoch must be nonnegative");
  if (validation || epoch < cfg.hk_start_epoch) return 0.0;
  if (cfg.curriculum == CurriculumMode::step || cfg.ramp_epochs == 0) return cfg.lambda_hk;
  const int into = epoch - cfg.hk_start_epoch;
  if (into >= cfg.ramp_epochs) return cfg.lambda_hk;
  return cfg.lambda_hk * static_cast<double>(into) / static_cast<double>(cfg.ramp_epochs);
}

LossBreakdown loss_breakdown(const LossParts& p, const LossConfig& cfg, int epoch, bool validation) {
  for (double v : {p.cls, p.red, p.kl, p.lsi, p.hk}) {
    if (!std::isfinite(v)) throw DataError("loss parts must be finite");
  }
  LossBreakdown b;
  b.lambda_hk = hk_curriculum(epoch, cfg, validation);
  b.cls = p.cls;
  b.red = cfg.lambda_red * p.red;
  b.vib = cfg.lambda_vib * p.kl;
  b.lsi = cfg.lsi_weight * p.lsi;
  b.hk = b.lambda_hk * p.hk;
  b.total = b.cls + b.red + (b.vib + b.lsi) + b.hk;
  return b;
}

double total_loss(const LossParts& parts, const LossConfig& cfg, int epoch, bool validation) {
  return loss_breakdown(parts, cfg, epoch, validation).total;
}

}  // namespace otdebias::loss
