// Handlers for histograms, Sinkhorn, the HK distance and loss, and the loss stack.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "handlers_internal.hpp"
#include "otdebias/losses.hpp"
#include "otdebias/schedule.hpp"

namespace otdebias::docsbook::detail {

namespace {

// Central differences with h = 1e-5 agree with analytic gradients to roughly 1e-9.
constexpr double kFdTolerance = 1e-6;

oracle::Matrix squared_center_cost(const std::vector<double>& edges) {
  std::vector<double> c;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c.push_back(0.5 * (edges[i] + edges[i + 1]));
  oracle::Matrix m(c.size(), std::vector<double>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) m[i][j] = (c[i] - c[j]) * (c[i] - c[j]);
  return m;
}

transport::SinkhornOptions sinkhorn_options(const json& in) {
  transport::SinkhornOptions o;
  o.eps = in.value("eps", o.eps);
  o.stop_tol = in.value("stop_tol", o.stop_tol);
  o.max_iter = in.value("max_iter", o.max_iter);
  return o;
}

std::vector<double> histogram_values(const json& in, const transport::HKConfig& cfg) {
  if (in.contains("values")) return vec(in.at("values"));
  if (in.contains("grid")) {
    const std::size_t n = in.at("grid");
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i)
      v.push_back(cfg.z_lo + (cfg.z_hi - cfg.z_lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    return v;
  }
  const auto& rep = in.at("repeat");
  return std::vector<double>(rep.at("count").get<std::size_t>(), rep.at("value").get<double>());
}

std::vector<double> sample_list(const json& j) {
  if (j.is_array()) return vec(j);
  return uniform_samples(j);
}

transport::Histogram hk_target(const json& in, const transport::HKConfig& cfg, double bandwidth) {
  const auto& t = in.at("target");
  const auto edges = transport::uniform_edges(cfg.n_bins, cfg.z_lo, cfg.z_hi);
  if (t.contains("soft_samples")) return transport::soft_histogram(sample_list(t.at("soft_samples")), edges, bandwidth).hist;
  if (t.contains("samples")) return transport::histogram(sample_list(t.at("samples")), cfg);
  return histogram_from(t, "mass", cfg);
}

double bandwidth_of(const json& in, const transport::HKConfig& cfg) {
  return in.value("bandwidth", cfg.bin_width());
}

loss::LossConfig loss_config(const json& in) {
  loss::LossConfig c;
  c.lambda_red = in.value("lambda_red", c.lambda_red);
  c.lambda_vib = in.value("lambda_vib", c.lambda_vib);
  c.lsi_weight = in.value("lsi_weight", c.lsi_weight);
  c.lambda_hk = in.value("lambda_hk", c.lambda_hk);
  c.hk_start_epoch = in.value("hk_start_epoch", c.hk_start_epoch);
  c.ramp_epochs = in.value("ramp_epochs", c.ramp_epochs);
  if (in.value("curriculum", "ramp") == "step") c.curriculum = loss::CurriculumMode::step;
  return c;
}

// Curriculum weight with the default constants: 0 before epoch 2, linear over ten epochs.
double oracle_lambda_hk(int epoch, bool validation) {
  if (validation || epoch < 2) return 0.0;
  return 0.035 * std::min(1.0, (epoch - 2) / 10.0);
}

std::vector<double> probs_of(const json& in) {
  if (in.contains("probs")) return vec(in.at("probs"));
  auto z = vec(in.at("logits"));
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) s += v = std::exp(v - mx);
  for (double& v : z) v /= s;
  return z;
}

double oracle_focal(const std::vector<double>& p, std::size_t y, double alpha, double gamma) {
  return -alpha * std::pow(1.0 - p[y], gamma) * std::log(p[y]);
}

}  // namespace

void register_transport(Registry& r) {
  r.add(
      "histogram",
      [](const json& in, const Context&) {
        const auto cfg = hk_config(in);
        const auto h = transport::histogram(histogram_values(in, cfg), cfg);
        const auto mx = std::max_element(h.mass.begin(), h.mass.end());
        return json{{"mass", h.mass},
                    {"argmax", mx - h.mass.begin()},
                    {"max_mass", *mx},
                    {"mass_min", *std::min_element(h.mass.begin(), h.mass.end())},
                    {"mass_max", *mx},
                    {"n_clamped", h.n_clamped}};
      },
      [](const json& in, const Context&) {
        const auto cfg = hk_config(in);
        const auto values = histogram_values(in, cfg);
        std::vector<double> edges;
        for (std::size_t i = 0; i <= cfg.n_bins; ++i)
          edges.push_back(cfg.z_lo + (cfg.z_hi - cfg.z_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_bins));
        std::vector<double> mass(cfg.n_bins, 0.0);
        for (std::size_t b : oracle::bin_indices(values, edges)) mass[b] += 1.0 / static_cast<double>(values.size());
        return json{{"mass", mass}};
      });

  r.add(
      "sinkhorn",
      [](const json& in, const Context&) {
        const auto opt = sinkhorn_options(in);
        if (in.value("mode", "") == "random_pairs") {
          const std::size_t pairs = in.at("pairs"), n = in.value("n_bins", std::size_t{40});
          Rng rng(in.value("seed", std::uint64_t{1}));
          const auto edges = transport::uniform_edges(n, 0.0, 2.0);
          const Tensor cost = transport::squared_distance_cost(transport::make_histogram(edges, std::vector<double>(n, 1.0 / static_cast<double>(n))).centers());
          bool all = true;
          double worst = 0.0;
          std::vector<int> iters;
          for (std::size_t k = 0; k < pairs; ++k) {
            const auto a = dirichlet(n, rng), b = dirichlet(n, rng);
            const auto plan = transport::sinkhorn(a, b, cost, opt);
            all = all && plan.converged && plan.marginal_err < opt.stop_tol;
            worst = std::max(worst, plan.marginal_err);
            iters.push_back(plan.iterations_used);
          }
          std::sort(iters.begin(), iters.end());
          return json{{"all_converged", all}, {"max_marginal_err", worst}, {"median_iterations", iters[iters.size() / 2]}};
        }
        const auto plan = transport::sinkhorn(vec(in.at("a")), vec(in.at("b")), to_tensor(mat(in.at("cost"))), opt);
        return json{{"plan", to_matrix(plan.plan)},
                    {"cost", plan.transport_cost},
                    {"entropic_cost", plan.entropic_cost},
                    {"marginal_err", plan.marginal_err},
                    {"converged", plan.converged},
                    {"iterations", plan.iterations_used}};
      },
      [](const json& in, const Context&) {
        if (in.value("mode", "") == "random_pairs") return json::object();
        return json{{"cost", oracle::exact_ot(vec(in.at("a")), vec(in.at("b")), mat(in.at("cost")))}};
      });

  r.add(
      "hellinger_sq",
      [](const json& in, const Context&) {
        const auto p = vec(in.at("p")), q = vec(in.at("q"));
        const auto edges = transport::uniform_edges(p.size(), 0.0, 1.0);
        return json{{"value", transport::hellinger_sq(transport::make_histogram(edges, p),
                                                      transport::make_histogram(edges, q))}};
      },
      [](const json& in, const Context&) {
        return json{{"value", oracle::hellinger_sq(vec(in.at("p")), vec(in.at("q")))}};
      });

  r.add(
      "hk_distance_sq",
      [](const json& in, const Context&) {
        const auto cfg = hk_config(in);
        const std::string mode = in.value("mode", "");
        if (mode == "symmetry" || mode == "identity") {
          Rng rng(in.value("seed", std::uint64_t{1}));
          const auto edges = transport::uniform_edges(cfg.n_bins, cfg.z_lo, cfg.z_hi);
          const std::size_t pairs = in.value("pairs", std::size_t{1});
          double worst = 0.0, worst_identity = 0.0;
          for (std::size_t k = 0; k < pairs; ++k) {
            const auto p = transport::make_histogram(edges, dirichlet(cfg.n_bins, rng));
            const auto q = transport::make_histogram(edges, dirichlet(cfg.n_bins, rng));
            if (mode == "symmetry") {
              worst = std::max(worst, std::abs(transport::hk_distance_sq(p, q, cfg).hk2 -
                                               transport::hk_distance_sq(q, p, cfg).hk2));
            } else {
              worst_identity = std::max(worst_identity, std::abs(transport::hk_distance_sq(p, p, cfg).hk2));
            }
          }
          return mode == "symmetry" ? json{{"max_asym", worst}} : json{{"max_abs_hk2", worst_identity}};
        }
        const auto res = transport::hk_distance_sq(histogram_from(in, "p", cfg), histogram_from(in, "q", cfg), cfg,
                                                   in.value("sqrt_density", false) ? transport::HKForm::sqrt_density
                                                                                   : transport::HKForm::density);
        return json{{"hk2", res.hk2}, {"transport", res.transport}, {"hellinger", res.hellinger},
                    {"raw_cost", res.raw_cost}};
      },
      [](const json& in, const Context&) {
        if (in.contains("mode")) return json::object();
        const auto cfg = hk_config(in);
        const auto p = vec(in.at("p")), q = vec(in.at("q"));
        const auto edges = in.contains("edges") ? vec(in.at("edges"))
                                                : transport::uniform_edges(p.size(), cfg.z_lo, cfg.z_hi);
        const double t = oracle::exact_ot(p, q, squared_center_cost(edges));
        const double h = oracle::hellinger_sq(p, q);
        return json{{"transport", t}, {"hellinger", h}, {"hk2", t + cfg.delta * h}};
      });

  auto hk_loss_main = [](const json& in, const Context&) {
    const auto cfg = hk_config(in);
    const double bw = bandwidth_of(in, cfg);
    const auto pred = sample_list(in.at("pred"));
    const auto res = transport::hk_loss(pred, hk_target(in, cfg, bw), cfg, bw);
    double norm = 0.0;
    bool negative = true;
    for (double g : res.grad) {
      norm += g * g;
      negative = negative && g < 0.0;
    }
    return json{{"loss", res.loss}, {"grad", res.grad}, {"grad_norm", std::sqrt(norm)}, {"all_grad_negative", negative}};
  };
  r.add("hk_loss", hk_loss_main, [](const json& in, const Context&) {
    const auto cfg = hk_config(in);
    const double bw = bandwidth_of(in, cfg);
    const auto target = hk_target(in, cfg, bw);
    const auto f = [&](const std::vector<double>& z) { return transport::hk_loss(z, target, cfg, bw).loss; };
    const auto fd = oracle::central_difference(f, sample_list(in.at("pred")), in.value("fd_step", 1e-5));
    json out{{"all_grad_negative", std::all_of(fd.begin(), fd.end(), [](double g) { return g < 0.0; })}};
    if (in.value("fd_compare", false)) {
      out["grad"] = fd;
      out[kOracleToleranceKey] = kFdTolerance;
    }
    return out;
  });
}

void register_losses(Registry& r) {
  r.add(
      "focal_loss",
      [](const json& in, const Context&) {
        const std::size_t label = in.at("label");
        const auto alpha = in.contains("alpha") ? vec(in.at("alpha")) : std::vector<double>{};
        const double gamma = in.at("gamma");
        const bool all = in.value("all_classes", false);
        const auto res = in.contains("logits") ? loss::focal_loss_logits(vec(in.at("logits")), label, alpha, gamma, all)
                                               : loss::focal_loss(vec(in.at("probs")), label, alpha, gamma, all);
        return json{{"loss", res.loss}, {"grad_logits", res.grad_logits}, {"clamped", res.clamped}};
      },
      [](const json& in, const Context&) {
        const std::size_t label = in.at("label");
        const double alpha = in.contains("alpha") ? vec(in.at("alpha"))[label] : 1.0;
        const double gamma = in.at("gamma");
        json out{{"loss", oracle_focal(probs_of(in), label, alpha, gamma)}};
        if (in.contains("logits")) {
          const auto f = [&](const std::vector<double>& z) {
            return oracle_focal(probs_of(json{{"logits", z}}), label, alpha, gamma);
          };
          out["grad_logits"] = oracle::central_difference(f, vec(in.at("logits")));
          out[kOracleToleranceKey] = kFdTolerance;
        }
        return out;
      });

  r.add(
      "adaptive_gamma",
      [](const json& in, const Context&) {
        return json{{"gamma", loss::adaptive_gamma(in.at("current"), in.at("baseline"), in.value("gamma0", 2.0),
                                                   in.value("eta", 1.0))}};
      },
      [](const json& in, const Context&) {
        const double cur = in.at("current"), base = in.at("baseline");
        const double x = (cur - base) / base;
        // tanh from exponentials.
        const double th = (std::exp(x) - std::exp(-x)) / (std::exp(x) + std::exp(-x));
        return json{{"gamma", in.value("gamma0", 2.0) + in.value("eta", 1.0) * th}};
      });

  r.add(
      "color_weight",
      [](const json& in, const Context&) {
        std::vector<double> w;
        for (double c : vec(in.at("colors"))) w.push_back(loss::color_weight(c));
        auto distinct = w;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        return json{{"weights", w}, {"distinct", distinct}};
      },
      [](const json& in, const Context&) {
        std::vector<double> w;
        for (double c : vec(in.at("colors"))) {
          if (0.6 <= c && c <= 1.2) w.push_back(1.0);
          else if (0.3 <= c && c <= 1.5) w.push_back(0.7);
          else w.push_back(0.3);
        }
        return json{{"weights", w}};
      });

  r.add(
      "redshift_loss",
      [](const json& in, const Context&) {
        const auto w = in.contains("w") ? vec(in.at("w")) : std::vector<double>{};
        const auto res = loss::redshift_loss(vec(in.at("z_pred")), vec(in.at("z_true")), w);
        return json{{"loss", res.loss}, {"grad", res.grad}};
      },
      [](const json& in, const Context&) {
        const auto zt = vec(in.at("z_true"));
        const auto w = in.contains("w") ? vec(in.at("w")) : std::vector<double>(zt.size(), 1.0);
        const auto f = [&](const std::vector<double>& zp) {
          double s = 0.0;
          for (std::size_t i = 0; i < zp.size(); ++i) {
            const double d = std::log(1.0 + zp[i]) - std::log(1.0 + zt[i]);
            s += w[i] * d * d;
          }
          return s;
        };
        const auto zp = vec(in.at("z_pred"));
        return json{{"loss", f(zp)}, {"grad", oracle::central_difference(f, zp)}, {kOracleToleranceKey, kFdTolerance}};
      });

  r.add(
      "vib_kl",
      [](const json& in, const Context&) {
        loss::VIBState s{vec(in.at("mu")), vec(in.at("sigma")), 0.0};
        const auto res = loss::vib_kl(s);
        return json{{"kl", res.kl}, {"grad_mu", res.grad_mu}, {"grad_sigma", res.grad_sigma}};
      },
      [](const json& in, const Context&) {
        const auto mu = vec(in.at("mu")), sigma = vec(in.at("sigma"));
        const auto kl = [](const std::vector<double>& m, const std::vector<double>& s) {
          double v = 0.0;
          for (std::size_t i = 0; i < m.size(); ++i) v += 0.5 * (m[i] * m[i] + s[i] * s[i] - 1.0 - std::log(s[i] * s[i]));
          return v;
        };
        const auto gm = oracle::central_difference([&](const std::vector<double>& m) { return kl(m, sigma); }, mu);
        const auto gs = oracle::central_difference([&](const std::vector<double>& s) { return kl(mu, s); }, sigma);
        return json{{"kl", kl(mu, sigma)}, {"grad_mu", gm}, {"grad_sigma", gs}, {kOracleToleranceKey, kFdTolerance}};
      });

  r.add(
      "reparameterize",
      [](const json& in, const Context&) {
        loss::VIBState s{vec(in.at("mu")), vec(in.at("sigma")), 0.0};
        const auto seed = in.value("seed", std::uint64_t{42});
        const std::size_t draws = in.value("draws", std::size_t{1});
        Rng rng(seed);
        const Tensor first = loss::reparameterize(s, rng);
        std::vector<double> sum = first.values();
        for (std::size_t k = 1; k < draws; ++k) {
          const Tensor z = loss::reparameterize(s, rng);
          for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += z[i];
        }
        for (double& v : sum) v /= static_cast<double>(draws);
        Rng again(seed);
        return json{{"z", first.values()}, {"mean", sum}, {"identical", loss::reparameterize(s, again) == first}};
      },
      [](const json& in, const Context&) { return json{{"mean", in.at("mu")}}; });

  r.add(
      "lsi_term",
      [](const json& in, const Context&) {
        const double c_raw = in.value("c_raw", 0.0);
        if (in.contains("kls")) {
          bool inc = true;
          double prev = -1.0;
          for (double kl : vec(in.at("kls"))) {
            const double v = loss::lsi_term(kl, c_raw).value;
            inc = inc && v > prev;
            prev = v;
          }
          return json{{"increasing", inc}};
        }
        const auto res = loss::lsi_term(in.at("kl"), c_raw);
        return json{{"value", res.value}, {"grad_kl", res.grad_kl}, {"grad_c_raw", res.grad_c_raw}};
      },
      [](const json& in, const Context&) {
        if (in.contains("kls")) return json::object();
        const auto f = [](const std::vector<double>& x) { return std::sqrt(std::log1p(std::exp(x[1])) * x[0]); };
        const std::vector<double> x{in.at("kl").get<double>(), in.value("c_raw", 0.0)};
        const auto g = oracle::central_difference(f, x);
        return json{{"value", f(x)}, {"grad_kl", g[0]}, {"grad_c_raw", g[1]}, {kOracleToleranceKey, kFdTolerance}};
      });

  auto parts_of = [](const json& in) {
    const auto& p = in.at("parts");
    return loss::LossParts{p.value("cls", 0.0), p.value("red", 0.0), p.value("kl", 0.0), p.value("lsi", 0.0),
                           p.value("hk", 0.0)};
  };
  r.add(
      "total_loss",
      [parts_of](const json& in, const Context&) {
        const auto b = loss::loss_breakdown(parts_of(in), loss_config(in.value("cfg", json::object())),
                                            in.at("epoch"), in.value("validation", false));
        return json{{"total", b.total}, {"hk_term", b.hk}, {"lambda_hk", b.lambda_hk}};
      },
      [parts_of](const json& in, const Context&) {
        const auto p = parts_of(in);
        const double lam = oracle_lambda_hk(in.at("epoch"), in.value("validation", false));
        return json{{"total", p.cls + 0.5 * p.red + 0.25 * p.kl + 0.12 * p.lsi + lam * p.hk}};
      });

  r.add(
      "hk_curriculum",
      [](const json& in, const Context&) {
        return json{{"lambda_hk", loss::hk_curriculum(in.at("epoch"), loss_config(in.value("cfg", json::object())),
                                                      in.value("validation", false))}};
      },
      [](const json& in, const Context&) {
        return json{{"lambda_hk", oracle_lambda_hk(in.at("epoch"), in.value("validation", false))}};
      });

  r.add(
      "uba_lr",
      [](const json& in, const Context&) {
        loss::ScheduleState s;
        s.t = in.at("t");
        s.phi = in.value("phi", s.phi);
        return json{{"lr", loss::uba_lr(s)}};
      },
      [](const json& in, const Context&) {
        const double t = in.at("t"), phi = in.value("phi", 0.7);
        const double pi = std::acos(-1.0);
        if (t < 10.0) return json{{"lr", 1e-4 + (1e-3 - 1e-4) * t / 10.0}};
        return json{{"lr", 5e-6 + 0.5 * (1e-3 - 5e-6) * (1.0 + std::cos((t - 10.0) / 110.0 * pi * phi))}};
      });
}

}  // namespace otdebias::docsbook::detail
