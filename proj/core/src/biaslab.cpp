#include "otdebias/biaslab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "otdebias/error.hpp"
#include "otdebias/parallel.hpp"

namespace otdebias::biaslab {

namespace {

using transport::Histogram;
using transport::HKConfig;

double logistic(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Differences below this are floating-point noise, not a separation between modes.
constexpr double kNumericalTie = 1e-12;

}  // namespace

void MixtureSpec::validate() const {
  if (components.empty()) throw ParameterError("mixture needs at least one component");
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.sd > 0.0)) throw ParameterError("mixture weights and widths must be positive");
  }
  if (!(z_hi > z_lo)) throw ParameterError("mixture range must satisfy z_lo < z_hi");
  if (!(c_sd >= 0.0)) throw ParameterError("color scatter must be nonnegative");
}

double SelectionFn::operator()(double z, double c) const {
  switch (kind) {
    case SelectionKind::none:
      return 1.0;
    case SelectionKind::logistic:
      return logistic(-k * (z - z0));
    case SelectionKind::color_gated:
      return floor + (1.0 - floor) * logistic(k_c * (c - c0));
    case SelectionKind::product:
      return logistic(-k * (z - z0)) * (floor + (1.0 - floor) * logistic(k_c * (c - c0)));
    case SelectionKind::step:
      return z < z_cut ? 1.0 : 0.0;
  }
  return 1.0;
}

void SelectionFn::validate() const {
  if (!std::isfinite(z0) || !std::isfinite(k) || !std::isfinite(c0) || !std::isfinite(k_c) || !std::isfinite(z_cut)) {
    throw ParameterError("selection parameters must be finite");
  }
  if (!(floor > 0.0 && floor <= 1.0)) throw ParameterError("selection floor must lie in (0, 1]");
}

std::string SelectionFn::describe() const {
  char buf[160];
  switch (kind) {
    case SelectionKind::none:
      return "none";
    case SelectionKind::logistic:
      std::snprintf(buf, sizeof buf, "logistic:z0=%g,k=%g", z0, k);
      break;
    case SelectionKind::color_gated:
      std::snprintf(buf, sizeof buf, "color:c0=%g,k=%g,floor=%g", c0, k_c, floor);
      break;
    case SelectionKind::product:
      std::snprintf(buf, sizeof buf, "product:z0=%g,k=%g,c0=%g,kc=%g,floor=%g", z0, k, c0, k_c, floor);
      break;
    case SelectionKind::step:
      std::snprintf(buf, sizeof buf, "step:z_cut=%g", z_cut);
      break;
  }
  return buf;
}

SelectionFn parse_selection(const std::string& text) {
  SelectionFn s;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "none") s.kind = SelectionKind::none;
  else if (kind == "logistic") s.kind = SelectionKind::logistic;
  else if (kind == "color" || kind == "color-gated") s.kind = SelectionKind::color_gated;
  else if (kind == "product") s.kind = SelectionKind::product;
  else if (kind == "step") s.kind = SelectionKind::step;
  else throw ParameterError("unknown selection kind '" + kind + "'");

  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ParameterError("selection parameter '" + item + "' is not key=value");
      const std::string key = item.substr(0, eq);
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(item.substr(eq + 1), &used);
        if (used != item.size() - eq - 1) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ParameterError("selection parameter '" + item + "' is not numeric");
      }
      if (key == "z0") s.z0 = value;
      else if (key == "k") (s.kind == SelectionKind::color_gated ? s.k_c : s.k) = value;
      else if (key == "c0") s.c0 = value;
      else if (key == "kc" || key == "k_c") s.k_c = value;
      else if (key == "floor") s.floor = value;
      else if (key == "z_cut") s.z_cut = value;
      else throw ParameterError("unknown selection parameter '" + key + "'");
    }
  }
  s.validate();
  return s;
}

SyntheticCatalog sample_catalog(const MixtureSpec& mix, const SelectionFn& selection, std::size_t n, Rng& rng,
                                const HKConfig& binning) {
  mix.validate();
  selection.validate();
  if (n == 0) throw ParameterError("sample_catalog needs n >= 1");

  double total_w = 0.0;
  for (const auto& c : mix.components) total_w += c.weight;

  SyntheticCatalog cat;
  cat.seed = rng.seed();
  cat.rows.reserve(n);
  std::vector<double> all_z, kept_z;
  all_z.reserve(n);
  char id[32];
  for (std::size_t s = 0; s < n; ++s) {
    double u = rng.uniform() * total_w;
    const MixtureComponent* comp = &mix.components.back();
    for (const auto& c : mix.components) {
      if (u < c.weight) {
        comp = &c;
        break;
      }
      u -= c.weight;
    }
    double z = 0.0;
    int tries = 0;
    do {
      if (++tries > 10000) throw ParameterError("mixture component has negligible mass inside the redshift range");
      z = comp->mean + comp->sd * rng.normal();
    } while (z < mix.z_lo || z > mix.z_hi);
    const double c = mix.c0 + mix.c1 * z + mix.c_sd * rng.normal();
    const bool keep = rng.uniform() < selection(z, c);

    std::snprintf(id, sizeof id, "g%06zu", s);
    io::CatalogRow row;
    row.id = id;
    row.z_true = z;
    row.g_r = c;
    row.observed = keep;
    cat.rows.push_back(std::move(row));
    all_z.push_back(z);
    if (keep) kept_z.push_back(z);
  }
  cat.n_accepted = kept_z.size();
  if (static_cast<double>(cat.n_accepted) < 1e-3 * static_cast<double>(n) || kept_z.empty()) {
    throw DegenerateSelectionError("selection accepted " + std::to_string(cat.n_accepted) + " of " +
                                   std::to_string(n) + " draws");
  }
  cat.true_dist = transport::histogram(all_z, binning);
  cat.observed_dist = transport::histogram(kept_z, binning);
  return cat;
}

Histogram population_histogram(const std::vector<io::CatalogRow>& rows, const HKConfig& binning) {
  std::vector<double> z;
  z.reserve(rows.size());
  for (const auto& r : rows) z.push_back(r.z_true);
  return transport::histogram(z, binning);
}

Histogram observed_histogram(const std::vector<io::CatalogRow>& rows, const HKConfig& binning) {
  std::vector<double> z;
  for (const auto& r : rows) {
    if (r.observed.value_or(true)) z.push_back(r.z_true);
  }
  return transport::histogram(z, binning);
}

double ks_statistic(const Histogram& a, const Histogram& b) {
  if (a.edges != b.edges) throw DataError("histograms use different binnings");
  double ca = 0.0, cb = 0.0, d = 0.0;
  for (std::size_t i = 0; i < a.bins(); ++i) {
    ca += a.mass[i];
    cb += b.mass[i];
    d = std::max(d, std::abs(ca - cb));
  }
  return d;
}

RecalibrateResult hk_recalibrate(const Histogram& observed, const Histogram& target, const HKConfig& cfg,
                                 const RecalibrateOptions& opt) {
  if (opt.steps < 0 || !(opt.lr > 0.0) || !(opt.floor > 0.0)) {
    throw ParameterError("recalibration needs steps >= 0, lr > 0 and a positive floor");
  }
  RecalibrateResult out;
  out.recovered = observed;
  double loss = transport::hk_distance_sq(observed, target, cfg).hk2;
  out.loss_trace.push_back(loss);

  const std::size_t n = observed.bins();
  std::vector<double> theta(n);
  for (std::size_t i = 0; i < n; ++i) theta[i] = std::log(std::max(observed.mass[i], opt.floor));
  Histogram current = observed;
  current.mass = loss::softmax(theta);

  int rising = 0;
  for (int step = 0; step < opt.steps; ++step) {
    if (loss <= 0.0) break;
    auto grad = transport::hk_distance_sq_grad(current, target, cfg).grad_p;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(grad[i])) grad[i] = 2.0 * cfg.delta * (1.0 - std::sqrt(target.mass[i] / opt.floor));
    }

    double lr = opt.lr;
    Histogram trial = current;
    std::vector<double> next(n);
    double trial_loss = 0.0;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t i = 0; i < n; ++i) next[i] = theta[i] - lr * grad[i];
      trial.mass = loss::softmax(next);
      trial_loss = transport::hk_distance_sq(trial, target, cfg).hk2;
      if (!opt.line_search || trial_loss < loss || halvings >= 30) break;
      lr *= 0.5;
    }
    if (opt.line_search && !(trial_loss < loss)) break;

    rising = trial_loss > loss ? rising + 1 : 0;
    theta = next;
    current = trial;
    loss = trial_loss;
    out.recovered = current;
    out.loss_trace.push_back(loss);
    ++out.steps_taken;
    if (rising >= 10) {
      out.failed = true;
      break;
    }
  }
  return out;
}

std::vector<double> isotonic_fit(const std::vector<double>& values, const std::vector<double>& weights) {
  if (values.size() != weights.size()) throw ShapeError("one weight per value required");
  struct Block {
    double sum_wv, sum_w;
    std::size_t count;
  };
  std::vector<Block> blocks;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0.0) throw DataError("isotonic weights must be nonnegative");
    if (weights[i] == 0.0) continue;
    active.push_back(i);
    blocks.push_back({weights[i] * values[i], weights[i], 1});
    while (blocks.size() > 1) {
      const auto& b = blocks[blocks.size() - 1];
      const auto& a = blocks[blocks.size() - 2];
      if (a.sum_wv / a.sum_w <= b.sum_wv / b.sum_w) break;
      const Block merged{a.sum_wv + b.sum_wv, a.sum_w + b.sum_w, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  if (active.empty()) throw DataError("isotonic fit needs at least one positive weight");

  std::vector<double> out(values.size());
  std::size_t k = 0;
  for (const auto& b : blocks) {
    const double v = b.sum_wv / b.sum_w;
    for (std::size_t j = 0; j < b.count; ++j) out[active[k++]] = v;
  }
  // Unweighted entries copy their left neighbour; leading ones copy the first weighted entry.
  double fill = out[active.front()];
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (weights[i] == 0.0) out[i] = fill;
    else fill = out[i];
  }
  return out;
}

std::string mode_label(AblationMode mode) {
  switch (mode) {
    case AblationMode::mse_only:
      return "mse_only";
    case AblationMode::color:
      return "color";
    case AblationMode::hk:
      return "hk";
    case AblationMode::color_hk:
      return "color_hk";
  }
  return "?";
}

double ColorModel::predict(double g_r) const {
  const auto it = std::upper_bound(edges.begin(), edges.end(), g_r);
  return values[static_cast<std::size_t>(it - edges.begin())];
}

namespace {

struct FitData {
  std::vector<std::size_t> bin;  // per training row
  std::vector<double> u;         // log(1 + z) per training row
  std::vector<double> w;         // per training row
  std::vector<double> w_bin, s_bin;
  double w_total = 0.0;
};

struct FitResult {
  ColorModel model;
  int steps = 0;
};

FitResult fit_mode(AblationMode mode, const std::vector<double>& edges, const std::vector<const io::CatalogRow*>& train,
                   const std::vector<double>& eval_bin_share, const Histogram& target, const AblationConfig& cfg) {
  const bool use_color = mode == AblationMode::color || mode == AblationMode::color_hk;
  const bool use_hk = mode == AblationMode::hk || mode == AblationMode::color_hk;
  const std::size_t bins = edges.size() + 1;
  ColorModel model{edges, {}};

  FitData d;
  d.w_bin.assign(bins, 0.0);
  d.s_bin.assign(bins, 0.0);
  for (const auto* r : train) {
    const auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), *r->g_r) - edges.begin());
    const double w = use_color ? loss::color_weight(*r->g_r, cfg.bands) : 1.0;
    const double u = std::log1p(r->z_true);
    d.bin.push_back(b);
    d.u.push_back(u);
    d.w.push_back(w);
    d.w_bin[b] += w;
    d.s_bin[b] += w * u;
    d.w_total += w;
  }
  std::vector<double> means(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) means[b] = d.w_bin[b] > 0.0 ? d.s_bin[b] / d.w_bin[b] : 0.0;
  model.values = isotonic_fit(means, d.w_bin);
  FitResult out{model, 0};
  if (!use_hk || cfg.hk_weight == 0.0) return out;

  // Predictive distribution: each row of bin b is spread like the bin's training residuals.
  const std::size_t n = train.size();
  std::vector<double> resid(n), point_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = d.u[i] - model.values[d.bin[i]];
    point_w[i] = eval_bin_share[d.bin[i]] * d.w[i] / d.w_bin[d.bin[i]];
  }
  const double h = cfg.bandwidth > 0.0 ? cfg.bandwidth : cfg.hk.bin_width();
  std::vector<double> pts(n);

  auto objective = [&](const std::vector<double>& v, std::vector<double>* grad) {
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = v[d.bin[i]] - d.u[i];
      mse += d.w[i] * r * r;
      pts[i] = std::expm1(v[d.bin[i]] + resid[i]);
    }
    mse /= d.w_total;
    const auto hk = transport::hk_loss(pts, target, cfg.hk, h, point_w);
    if (grad) {
      grad->assign(bins, 0.0);
      for (std::size_t b = 0; b < bins; ++b) (*grad)[b] = 2.0 * (d.w_bin[b] * v[b] - d.s_bin[b]) / d.w_total;
      for (std::size_t i = 0; i < n; ++i) (*grad)[d.bin[i]] += cfg.hk_weight * hk.grad[i] * (1.0 + pts[i]);
    }
    return mse + cfg.hk_weight * hk.loss;
  };

  const double v_lo = std::log1p(cfg.hk.z_lo), v_hi = std::log1p(cfg.hk.z_hi);
  std::vector<double> v = model.values, grad, trial(bins);
  double j = objective(v, &grad);
  for (int step = 0; step < cfg.max_steps; ++step) {
    double lr = cfg.lr;
    double j_trial = j;
    bool moved = false;
    for (int halvings = 0; halvings < 30; ++halvings, lr *= 0.5) {
      for (std::size_t b = 0; b < bins; ++b) {
        // Diagonal scaling: squared-error curvature plus the bin's share of the predicted mass.
        const double scale = 2.0 * (d.w_bin[b] / d.w_total + cfg.hk_weight * eval_bin_share[b]);
        trial[b] = d.w_bin[b] > 0.0 ? v[b] - lr * grad[b] / scale : v[b];
      }
      // Projection: monotone in color, then into the predictable range (clamping keeps the order).
      trial = isotonic_fit(trial, d.w_bin);
      for (double& t : trial) t = std::clamp(t, v_lo, v_hi);
      double change = 0.0;
      for (std::size_t b = 0; b < bins; ++b) change = std::max(change, std::abs(trial[b] - v[b]));
      if (change < cfg.step_tol) break;
      j_trial = objective(trial, nullptr);
      if (j_trial < j) {
        moved = true;
        break;
      }
    }
    if (!moved) break;
    v = trial;
    j = objective(v, &grad);
    ++out.steps;
  }
  out.model.values = v;
  return out;
}

}  // namespace

AblationReport ablation_run(const std::vector<io::CatalogRow>& rows, const std::vector<double>& target_z,
                            const AblationConfig& cfg) {
  cfg.hk.validate();
  if (rows.empty()) throw DataError("ablation needs a nonempty catalog");
  if (target_z.empty()) throw DataError("ablation needs a nonempty target sample");
  if (cfg.color_bins < 1) throw ParameterError("ablation needs at least one color bin");
  std::vector<const io::CatalogRow*> train;
  for (const auto& r : rows) {
    if (!r.g_r) throw DataError("catalog row '" + r.id + "' has no g_r color");
    if (r.observed.value_or(true)) train.push_back(&r);
  }
  if (train.empty()) throw DataError("catalog has no observed rows to train on");

  // Quantile edges of the training colors plus the band thresholds, so color weights are constant per bin.
  std::vector<double> colors;
  for (const auto* r : train) colors.push_back(*r->g_r);
  std::sort(colors.begin(), colors.end());
  std::vector<double> edges;
  for (std::size_t k = 1; k < cfg.color_bins; ++k) edges.push_back(colors[k * colors.size() / cfg.color_bins]);
  for (double t : {cfg.bands.medium_lo, cfg.bands.high_lo, cfg.bands.high_hi, cfg.bands.medium_hi}) edges.push_back(t);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  const std::size_t bins = edges.size() + 1;
  std::vector<double> share(bins, 0.0);
  for (const auto& r : rows) {
    share[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), *r.g_r) - edges.begin())] += 1.0;
  }
  for (double& s : share) s /= static_cast<double>(rows.size());

  const double h = cfg.bandwidth > 0.0 ? cfg.bandwidth : cfg.hk.bin_width();
  const auto target =
      transport::soft_histogram(target_z, transport::uniform_edges(cfg.hk.n_bins, cfg.hk.z_lo, cfg.hk.z_hi), h).hist;

  AblationReport rep;
  rep.n_train = train.size();
  rep.n_eval = rows.size();
  std::vector<double> z_true(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) z_true[i] = rows[i].z_true;

  std::array<std::vector<double>, 4> sq_err;
  parallel_for(4, [&](std::size_t m) {
    const auto fit = fit_mode(kAblationModes[m], edges, train, share, target, cfg);
    std::vector<double> pred(rows.size());
    sq_err[m].resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      pred[i] = std::clamp(std::expm1(fit.model.predict(*rows[i].g_r)), cfg.hk.z_lo, cfg.hk.z_hi);
      const double r = std::log1p(pred[i]) - std::log1p(z_true[i]);
      sq_err[m][i] = r * r;
    }
    rep.labels[m] = mode_label(kAblationModes[m]);
    rep.models[m] = fit.model;
    rep.steps[m] = fit.steps;
    rep.reports[m] = metrics::compute_metrics(pred, z_true, cfg.outlier_thresh);
  });

  // Paired bootstrap over evaluation rows: each resample scores every mode on the same rows.
  const std::size_t n = rows.size(), n_boot = cfg.bootstrap_resamples;
  if (n_boot > 0) {
    Rng rng(cfg.bootstrap_seed);
    std::array<std::vector<double>, 4> diffs;
    for (auto& dv : diffs) dv.reserve(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
      std::array<double, 4> sums{};
      for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        for (std::size_t m = 0; m < 4; ++m) sums[m] += sq_err[m][idx];
      }
      for (std::size_t m = 0; m < 4; ++m) diffs[m].push_back((sums[m] - sums[0]) / static_cast<double>(n));
    }
    for (std::size_t m = 0; m < 4; ++m) {
      auto& dv = diffs[m];
      auto& pc = rep.versus_baseline[m];
      double s = 0.0, s2 = 0.0;
      for (double x : dv) s += x;
      pc.mean_diff = s / static_cast<double>(n_boot);
      for (double x : dv) s2 += (x - pc.mean_diff) * (x - pc.mean_diff);
      pc.std_diff = std::sqrt(s2 / static_cast<double>(n_boot));
      std::sort(dv.begin(), dv.end());
      pc.ci_lo = dv[static_cast<std::size_t>(0.025 * static_cast<double>(n_boot))];
      pc.ci_hi = dv[std::min(n_boot - 1, static_cast<std::size_t>(std::ceil(0.975 * static_cast<double>(n_boot))) - 1)];
      pc.significant = pc.ci_lo > kNumericalTie || pc.ci_hi < -kNumericalTie;
    }
  }
  return rep;
}

AblationReport ablation_run(const std::vector<io::CatalogRow>& rows, const AblationConfig& cfg) {
  std::vector<double> z;
  z.reserve(rows.size());
  for (const auto& r : rows) z.push_back(r.z_true);
  return ablation_run(rows, z, cfg);
}

}  // namespace otdebias::biaslab
