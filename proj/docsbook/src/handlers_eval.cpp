// Handlers for metrics, the bias lab, catalog and galaxy I/O and the runner itself, plus the
// shared input helpers and the default registry.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "handlers_internal.hpp"
#include "otdebias/biaslab.hpp"
#include "otdebias/catalog.hpp"
#include "otdebias/metrics.hpp"
#include "otdebias/stats.hpp"

namespace otdebias::docsbook {

namespace detail {

Tensor to_tensor(const oracle::Matrix& m) {
  std::vector<double> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  return Tensor({m.size(), m.empty() ? 0 : m[0].size()}, std::move(flat));
}

oracle::Matrix to_matrix(const Tensor& t) {
  oracle::Matrix m(t.extent(0), std::vector<double>(t.extent(1)));
  for (std::size_t i = 0; i < t.extent(0); ++i)
    for (std::size_t j = 0; j < t.extent(1); ++j) m[i][j] = t(i, j);
  return m;
}

std::vector<double> dirichlet(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) s += x = -std::log(1.0 - rng.uniform());
  for (double& x : v) x /= s;
  return v;
}

std::vector<double> uniform_samples(const json& spec) {
  Rng rng(spec.value("seed", std::uint64_t{1}));
  const double lo = spec.at("lo"), hi = spec.at("hi");
  std::vector<double> out(spec.at("n").get<std::size_t>());
  for (double& v : out) v = rng.uniform(lo, hi);
  return out;
}

transport::HKConfig hk_config(const json& in) {
  transport::HKConfig c;
  c.n_bins = in.value("n_bins", c.n_bins);
  c.z_lo = in.value("z_lo", c.z_lo);
  c.z_hi = in.value("z_hi", c.z_hi);
  c.eps_entropic = in.value("eps", c.eps_entropic);
  c.stop_tol = in.value("stop_tol", c.stop_tol);
  c.max_iter = in.value("max_iter", c.max_iter);
  c.delta = in.value("delta", c.delta);
  return c;
}

transport::Histogram histogram_from(const json& in, const std::string& key, const transport::HKConfig& cfg) {
  const auto mass = vec(in.at(key));
  auto edges = in.contains("edges") ? vec(in.at("edges")) : transport::uniform_edges(mass.size(), cfg.z_lo, cfg.z_hi);
  return transport::make_histogram(std::move(edges), mass);
}

io::SyntheticGalaxySpec galaxy_spec(const json& in) {
  io::SyntheticGalaxySpec s;
  if (in.contains("kind")) s.kind = io::parse_galaxy_kind(in.at("kind"));
  s.arms = in.value("arms", s.arms);
  s.pitch = in.value("pitch", s.pitch);
  s.axis_ratio = in.value("axis_ratio", s.axis_ratio);
  s.angle = in.value("angle", s.angle);
  s.radius = in.value("radius", s.radius);
  s.sersic_n = in.value("sersic_n", s.sersic_n);
  s.noise_sigma = in.value("noise_sigma", s.noise_sigma);
  s.resolution = in.value("resolution", s.resolution);
  return s;
}

namespace {

std::vector<io::CatalogRow> rows_from_pairs(const json& pairs) {
  std::vector<io::CatalogRow> rows;
  for (const auto& p : pairs) {
    io::CatalogRow r;
    r.id = "r" + std::to_string(rows.size());
    r.z_true = p.at(0);
    r.z_pred = p.at(1).get<double>();
    rows.push_back(r);
  }
  return rows;
}

biaslab::SyntheticCatalog simulate(const json& in, const std::string& selection) {
  Rng rng(in.value("seed", std::uint64_t{7}));
  return biaslab::sample_catalog(biaslab::MixtureSpec{}, biaslab::parse_selection(selection),
                                 in.value("n", std::size_t{10000}), rng);
}

json issues(const std::vector<io::RowIssue>& list) {
  json out = json::array();
  for (const auto& i : list) out.push_back({{"line", i.line}, {"id", i.id}, {"reason", i.reason}});
  return out;
}

json row_json(const io::CatalogRow& r) {
  json j{{"id", r.id}, {"z_true", r.z_true}};
  if (r.z_pred) j["z_pred"] = *r.z_pred;
  if (r.g_r) j["g_r"] = *r.g_r;
  if (r.class_true) j["class_true"] = *r.class_true;
  if (r.class_pred) j["class_pred"] = *r.class_pred;
  return j;
}

Tensor render(const json& in, std::size_t resolution) {
  auto spec = galaxy_spec(in);
  spec.resolution = resolution;
  Rng rng(in.value("seed", std::uint64_t{0}));
  return io::gen_galaxy(spec, rng);
}

std::vector<double> downsample2(const Tensor& img) {
  const std::size_t n = img.extent(0) / 2;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.push_back(0.25 * (img(2 * i, 2 * j) + img(2 * i + 1, 2 * j) + img(2 * i, 2 * j + 1) + img(2 * i + 1, 2 * j + 1)));
  return out;
}

// Wraps an op's main handler so that every numeric output field named `field` is shifted.
void perturb(Registry& reg, const json& spec) {
  OpEntry* e = reg.find(spec.at("op"));
  if (!e) throw std::invalid_argument("cannot perturb unknown op");
  const std::string field = spec.at("field");
  const double delta = spec.at("delta");
  e->main = [inner = e->main, field, delta](const json& in, const Context& ctx) {
    json out = inner(in, ctx);
    if (out.contains(field) && out.at(field).is_number()) out[field] = out.at(field).get<double>() + delta;
    return out;
  };
}

}  // namespace

void register_eval(Registry& r) {
  r.add(
      "z_norm",
      [](const json& in, const Context&) {
        if (in.contains("zs")) {
          bool inc = true;
          const auto zs = vec(in.at("zs"));
          for (std::size_t i = 1; i < zs.size(); ++i) inc = inc && metrics::z_norm(zs[i]) > metrics::z_norm(zs[i - 1]);
          return json{{"increasing", inc}};
        }
        return json{{"value", metrics::z_norm(in.at("z"))}};
      },
      [](const json& in, const Context&) {
        if (in.contains("zs")) return json::object();
        return json{{"value", std::log(1.0 + in.at("z").get<double>())}};
      });

  r.add(
      "compute_metrics",
      [](const json& in, const Context&) {
        const auto rep = metrics::compute_metrics(rows_from_pairs(in.at("rows")),
                                                  in.value("outlier_thresh", metrics::kDefaultOutlierThreshold));
        json out{{"log_mse", rep.log_mse}, {"bias", rep.bias}, {"outlier_rate", rep.outlier_rate},
                 {"n_samples", rep.n_samples}, {"n_filtered", rep.n_filtered}};
        for (const auto& b : rep.per_bin) {
          out["bin_labels"].push_back(b.label);
          out["bin_n"].push_back(b.n);
        }
        return out;
      },
      [](const json& in, const Context&) {
        const double thresh = in.value("outlier_thresh", 0.15);
        double se = 0.0, bias = 0.0, out = 0.0;
        const auto& rows = in.at("rows");
        for (const auto& p : rows) {
          const double z = p.at(0), zp = p.at(1);
          se += std::pow(std::log(1.0 + zp) - std::log(1.0 + z), 2);
          bias += zp - z;
          if (std::abs(zp - z) / (1.0 + z) > thresh) out += 1.0;
        }
        const double n = static_cast<double>(rows.size());
        return json{{"log_mse", se / n}, {"bias", bias / n}, {"outlier_rate", out / n}};
      });

  r.add("relative_improvement", [](const json& in, const Context&) {
    return json{{"percent", metrics::relative_improvement(in.at("baseline"), in.at("treated"))}};
  });

  r.add(
      "coefficient_of_variation",
      [](const json& in, const Context&) {
        return json{{"percent", metrics::coefficient_of_variation(vec(in.at("values")))}};
      },
      [](const json& in, const Context&) {
        const auto v = vec(in.at("values"));
        return json{{"percent", 100.0 * oracle::population_std(v) / oracle::mean(v)}};
      });

  r.add(
      "accuracy",
      [](const json& in, const Context&) {
        const auto p = in.at("pred").get<std::vector<int>>(), t = in.at("truth").get<std::vector<int>>();
        return json{{"percent", metrics::accuracy(p, t)}};
      },
      [](const json& in, const Context&) {
        const auto p = in.at("pred").get<std::vector<int>>(), t = in.at("truth").get<std::vector<int>>();
        double hits = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) hits += p[i] == t[i] ? 1.0 : 0.0;
        return json{{"percent", 100.0 * hits / static_cast<double>(p.size())}};
      });

  r.add(
      "sample_catalog",
      [](const json& in, const Context&) {
        const auto cat = simulate(in, in.at("selection"));
        double above = 0.0;
        for (std::size_t b = 0; b < cat.observed_dist.bins(); ++b)
          if (cat.observed_dist.edges[b] >= 1.0) above += cat.observed_dist.mass[b];
        const double ks = biaslab::ks_statistic(cat.observed_dist, cat.true_dist);
        json out{{"n_accepted", cat.n_accepted},
                 {"observed_equals_true", cat.observed_dist.mass == cat.true_dist.mass},
                 {"observed_mass_above_1", above},
                 {"ks", ks}};
        if (in.contains("control")) {
          const auto ctl = simulate(in, in.at("control"));
          const double ks_ctl = biaslab::ks_statistic(ctl.observed_dist, ctl.true_dist);
          out["ks_control"] = ks_ctl;
          out["ks_exceeds_control"] = ks > ks_ctl;
        }
        return out;
      },
      [](const json& in, const Context&) {
        // KS recomputed from the raw rows with the oracle binning.
        const auto cat = simulate(in, in.at("selection"));
        const auto edges = transport::uniform_edges(40, 0.0, 2.0);
        std::vector<double> all, seen;
        for (const auto& row : cat.rows) {
          all.push_back(row.z_true);
          if (row.observed.value_or(true)) seen.push_back(row.z_true);
        }
        auto masses = [&](const std::vector<double>& v) {
          std::vector<double> m(40, 0.0);
          for (std::size_t b : oracle::bin_indices(v, edges)) m[b] += 1.0 / static_cast<double>(v.size());
          return m;
        };
        return json{{"ks", oracle::ks_from_masses(masses(seen), masses(all))}};
      });

  r.add("hk_recalibrate", [](const json& in, const Context&) {
    const auto cfg = hk_config(in);
    biaslab::RecalibrateOptions opt;
    opt.steps = in.value("steps", opt.steps);
    opt.lr = in.value("lr", opt.lr);
    transport::Histogram observed, target;
    if (in.contains("scenario")) {
      const auto cat = simulate(in.at("scenario"), in.at("scenario").at("selection"));
      observed = cat.observed_dist;
      target = cat.true_dist;
    } else if (in.contains("observed_bin")) {
      const auto edges = transport::uniform_edges(cfg.n_bins, cfg.z_lo, cfg.z_hi);
      std::vector<double> a(cfg.n_bins, 0.0), b(cfg.n_bins, 0.0);
      a[in.at("observed_bin").get<std::size_t>()] = 1.0;
      b[in.at("target_bin").get<std::size_t>()] = 1.0;
      observed = transport::make_histogram(edges, a);
      target = transport::make_histogram(edges, b);
    } else {
      observed = histogram_from(in, "observed", cfg);
      target = histogram_from(in, "target", cfg);
    }
    const auto res = biaslab::hk_recalibrate(observed, target, cfg, opt);
    double change = 0.0, sum = 0.0, target_mass = 0.0;
    for (std::size_t i = 0; i < observed.bins(); ++i) {
      change = std::max(change, std::abs(res.recovered.mass[i] - observed.mass[i]));
      sum += res.recovered.mass[i];
      if (target.mass[i] == *std::max_element(target.mass.begin(), target.mass.end())) {
        target_mass = std::max(target_mass, res.recovered.mass[i]);
      }
    }
    const double before = transport::hk_distance_sq(observed, target, cfg).hk2;
    const double after = transport::hk_distance_sq(res.recovered, target, cfg).hk2;
    return json{{"max_abs_change", change},
                {"mass_sum", sum},
                {"target_bin_mass", target_mass},
                {"ratio", before > 0.0 ? after / before : 0.0},
                {"ratio_at_most_half", after <= 0.5 * before},
                {"steps_taken", res.steps_taken},
                {"failed", res.failed}};
  });

  r.add("ablation_run", [](const json& in, const Context&) {
    const auto cat = simulate(in, in.at("selection"));
    biaslab::AblationConfig cfg;
    cfg.bootstrap_resamples = in.value("bootstrap_resamples", cfg.bootstrap_resamples);
    const auto rep = biaslab::ablation_run(cat.rows, cfg);
    json out{{"labels", rep.labels}};
    bool noise = true, significant = false;
    for (std::size_t m = 0; m < 4; ++m) {
      out["log_mse"].push_back(rep.reports[m].log_mse);
      const auto& c = rep.versus_baseline[m];
      noise = noise && (c.mean_diff == 0.0 || std::abs(c.mean_diff) < 2.0 * c.std_diff);
      significant = significant || c.significant;
    }
    out["within_noise"] = noise;
    out["significant_any"] = significant;
    out["hk_lower_than_mse"] = rep.reports[2].log_mse < rep.reports[0].log_mse;
    return out;
  });

  r.add("parse_catalog", [](const json& in, const Context&) {
    std::istringstream text(in.at("csv").get<std::string>());
    io::CatalogSchema schema;
    schema.strict = in.value("strict", false);
    const auto parsed = io::parse_catalog(text, schema);
    json rows = json::array();
    for (const auto& row : parsed.rows) rows.push_back(row_json(row));
    return json{{"n_rows", parsed.rows.size()},
                {"rows", rows},
                {"n_filtered", parsed.filtered.size()},
                {"filtered", issues(parsed.filtered)},
                {"n_errors", parsed.errors.size()},
                {"errors", issues(parsed.errors)}};
  });

  r.add(
      "gen_galaxy",
      [](const json& in, const Context&) {
        const std::string check = in.at("check");
        if (check == "xres") {
          const Tensor lo = render(in, 64), hi = render(in, 128);
          return json{{"pearson", pearson(lo.data(), downsample2(hi))}};
        }
        const Tensor img = render(in, in.value("resolution", std::size_t{64}));
        const std::size_t n = img.extent(0);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double v = img(i, j);
            if (check == "rot180") {
              err = std::max(err, std::abs(v - img(n - 1 - i, n - 1 - j)));
            } else {
              // Pixels related by a symmetry of the square grid sit at exactly the same radius.
              for (double u : {img(j, i), img(n - 1 - i, j), img(i, n - 1 - j), img(n - 1 - j, n - 1 - i)})
                err = std::max(err, std::abs(v - u));
            }
          }
        }
        return json{{check == "rot180" ? "rot180_err" : "radial_err", err}};
      },
      [](const json& in, const Context&) {
        if (in.at("check") != "xres") return json::object();
        const Tensor lo = render(in, 64), hi = render(in, 128);
        return json{{"pearson", oracle::pearson(lo.data(), downsample2(hi))}};
      });

  r.add("run_examples", [](const json& in, const Context& ctx) {
    if (!ctx.registry) throw std::logic_error("run_examples needs a registry in its context");
    Registry reg = *ctx.registry;
    if (in.contains("perturb_main")) perturb(reg, in.at("perturb_main"));
    std::vector<ExampleCase> cases;
    if (in.value("corpus", "") == "default") {
      const auto excluded = in.value("exclude_ops", std::vector<std::string>{"run_examples"});
      const auto dir = ctx.corpus_dir.empty() ? default_corpus_dir() : ctx.corpus_dir;
      for (auto& c : load_corpus(dir)) {
        if (std::find(excluded.begin(), excluded.end(), c.op) == excluded.end()) cases.push_back(std::move(c));
      }
    } else {
      for (const auto& j : in.at("cases")) cases.push_back(parse_case(j, "inline"));
    }
    Context inner = ctx;
    inner.registry = &reg;
    const auto report = run_examples(cases, reg, inner);
    json statuses = json::array();
    for (const auto& res : report.results) statuses.push_back(status_name(res.status));
    const double total = static_cast<double>(report.results.size());
    return json{{"total", report.results.size()},
                {"passed", report.count(Status::pass)},
                {"failed", report.results.size() - report.count(Status::pass)},
                {"pass_rate", total > 0 ? 100.0 * static_cast<double>(report.count(Status::pass)) / total : 0.0},
                {"statuses", statuses}};
  });
}

}  // namespace detail

Registry default_registry() {
  Registry r;
  detail::register_arrays(r);
  detail::register_transport(r);
  detail::register_losses(r);
  detail::register_eval(r);
  return r;
}

}  // namespace otdebias::docsbook
