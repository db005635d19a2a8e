#include "otdebias/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "otdebias/biaslab.hpp"
#include "otdebias/catalog.hpp"
#include "otdebias/encodings.hpp"
#include "otdebias/error.hpp"
#include "otdebias/galaxy.hpp"
#include "otdebias/losses.hpp"
#include "otdebias/metrics.hpp"
#include "otdebias/ndt.hpp"
#include "otdebias/parallel.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/schedule.hpp"
#include "otdebias/ssm.hpp"
#include "otdebias/transport.hpp"
#include "otdebias/wavelet.hpp"

namespace otdebias::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string ndt_bytes(const Tensor& t) {
  const auto bytes = encode_ndt(t);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::string> csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' has no header row");
  std::vector<std::string> cols;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell.erase(std::remove_if(cell.begin(), cell.end(), [](char c) { return c == '\r' || c == ' '; }), cell.end());
    cols.push_back(cell);
  }
  return cols;
}

/// Redshift values of one column. An empty `column` picks the first of `preferred` present in
/// the header. When the file has an observed column only the observed rows are kept.
std::vector<double> read_z(const std::string& path, const std::string& column,
                           const std::vector<std::string>& preferred) {
  const auto header = csv_header(path);
  const auto has = [&](const std::string& c) { return std::find(header.begin(), header.end(), c) != header.end(); };
  std::string col = column;
  if (col.empty()) {
    for (const auto& p : preferred)
      if (has(p)) {
        col = p;
        break;
      }
    if (col.empty()) throw SchemaError("'" + path + "' has none of the redshift columns z, z_pred, z_true");
  }
  std::vector<std::string> names{col};
  const bool filter = has("observed") && col != "observed";
  if (filter) names.push_back("observed");
  const auto table = io::read_numeric_columns(fs::path(path), names);
  const auto& z = table.columns.at(col);
  if (!filter) return z;
  std::vector<double> kept;
  const auto& obs = table.columns.at("observed");
  for (std::size_t i = 0; i < z.size(); ++i)
    if (obs[i] != 0.0) kept.push_back(z[i]);
  return kept;
}

struct Binning {
  std::size_t bins = 40;
  double z_lo = 0.0;
  double z_hi = 2.0;
  double eps = 0.1;
  double stop_tol = 1e-4;
  int max_iter = 50;
  double delta = 1.0;

  void add_to(CLI::App* app) {
    app->add_option("--bins", bins, "Histogram bins")->capture_default_str();
    app->add_option("--zmin", z_lo, "Lower redshift edge")->capture_default_str();
    app->add_option("--zmax", z_hi, "Upper redshift edge")->capture_default_str();
    app->add_option("--eps", eps, "Entropic regularization")->capture_default_str();
    app->add_option("--stop-tol", stop_tol, "Sinkhorn marginal tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "Sinkhorn iteration cap")->capture_default_str();
    app->add_option("--delta", delta, "Hellinger weight")->capture_default_str();
  }

  transport::HKConfig config() const {
    transport::HKConfig cfg;
    cfg.n_bins = bins;
    cfg.z_lo = z_lo;
    cfg.z_hi = z_hi;
    cfg.eps_entropic = eps;
    cfg.stop_tol = stop_tol;
    cfg.max_iter = max_iter;
    cfg.delta = delta;
    cfg.validate();
    return cfg;
  }
};

json metrics_json(const metrics::MetricsReport& r) {
  json bins = json::object();
  for (const auto& b : r.per_bin) bins[b.label] = {{"log_mse", b.log_mse}, {"bias", b.bias}, {"n", b.n}};
  return {{"overall", {{"log_mse", r.log_mse}, {"bias", r.bias}, {"outlier_rate", r.outlier_rate}}},
          {"per_bin", bins},
          {"n_samples", r.n_samples},
          {"n_filtered", r.n_filtered}};
}

json issues_json(const std::vector<io::RowIssue>& issues) {
  json a = json::array();
  for (const auto& i : issues) a.push_back({{"line", i.line}, {"id", i.id}, {"reason", i.reason}});
  return a;
}

std::vector<double> broadcast(const json& j, std::size_t n, double fallback, const char* name) {
  if (j.is_null()) return std::vector<double>(n, fallback);
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  auto v = j.get<std::vector<double>>();
  if (v.size() != n) throw ShapeError(std::string("params.") + name + " must have one entry per channel");
  return v;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

double json_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

// Columns named prefix0, prefix1, ... in header order.
std::vector<std::string> indexed_columns(const std::vector<std::string>& header, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t k = 0;; ++k) {
    const std::string name = prefix + std::to_string(k);
    if (std::find(header.begin(), header.end(), name) == header.end()) break;
    out.push_back(name);
  }
  return out;
}

int cmd_loss_eval(const std::string& pred_path, const std::string& cfg_path, std::ostream& out,
                  const std::string& out_path) {
  const json cfgj = cfg_path.empty() ? json::object() : read_json_file(cfg_path);
  loss::LossConfig cfg;
  cfg.lambda_red = json_or(cfgj, "lambda_red", cfg.lambda_red);
  cfg.lambda_vib = json_or(cfgj, "lambda_vib", cfg.lambda_vib);
  cfg.lsi_weight = json_or(cfgj, "lsi_weight", cfg.lsi_weight);
  cfg.lambda_hk = json_or(cfgj, "lambda_hk", cfg.lambda_hk);
  cfg.hk_start_epoch = cfgj.value("hk_start_epoch", cfg.hk_start_epoch);
  cfg.ramp_epochs = cfgj.value("ramp_epochs", cfg.ramp_epochs);
  if (cfgj.value("curriculum", std::string("ramp")) == "step") cfg.curriculum = loss::CurriculumMode::step;
  cfg.gamma0 = json_or(cfgj, "gamma0", cfg.gamma0);
  if (cfgj.contains("alpha")) cfg.alpha = cfgj.at("alpha").get<std::vector<double>>();
  cfg.validate();
  const int epoch = cfgj.value("epoch", 0);
  const bool validation = cfgj.value("validation", false);
  const double c_raw = json_or(cfgj, "c_raw", 0.0);
  const bool color = cfgj.value("color_weights", true);

  const auto header = csv_header(pred_path);
  const auto probs = indexed_columns(header, "p_");
  const auto mus = indexed_columns(header, "mu_");
  const auto sigmas = indexed_columns(header, "sigma_");
  if (mus.size() != sigmas.size()) throw SchemaError("mu_k and sigma_k columns must pair up");
  const bool has_gr = std::find(header.begin(), header.end(), "g_r") != header.end();
  const bool has_cls = !probs.empty() && std::find(header.begin(), header.end(), "class_true") != header.end();

  std::vector<std::string> names{"z_true", "z_pred"};
  if (has_gr) names.push_back("g_r");
  if (has_cls) {
    names.push_back("class_true");
    names.insert(names.end(), probs.begin(), probs.end());
  }
  names.insert(names.end(), mus.begin(), mus.end());
  names.insert(names.end(), sigmas.begin(), sigmas.end());
  const auto t = io::read_numeric_columns(fs::path(pred_path), names);
  if (t.rows == 0) throw DataError("'" + pred_path + "' has no rows");
  const double n = static_cast<double>(t.rows);

  loss::LossParts parts;
  const auto& zt = t.columns.at("z_true");
  const auto& zp = t.columns.at("z_pred");
  std::vector<double> w;
  if (has_gr && color)
    for (double c : t.columns.at("g_r")) w.push_back(loss::color_weight(c));
  parts.red = loss::redshift_loss(zp, zt, w).loss / n;

  if (has_cls) {
    for (std::size_t i = 0; i < t.rows; ++i) {
      std::vector<double> p;
      for (const auto& c : probs) p.push_back(t.columns.at(c)[i]);
      const double label = t.columns.at("class_true")[i];
      if (label < 0 || label >= static_cast<double>(p.size()) || label != std::floor(label))
        throw DataError("class_true out of range on data row " + std::to_string(i + 1));
      parts.cls += loss::focal_loss(p, static_cast<std::size_t>(label), cfg.alpha, cfg.gamma0).loss / n;
    }
  }
  if (!mus.empty()) {
    for (std::size_t i = 0; i < t.rows; ++i) {
      loss::VIBState s;
      for (std::size_t k = 0; k < mus.size(); ++k) {
        s.mu.push_back(t.columns.at(mus[k])[i]);
        s.sigma.push_back(t.columns.at(sigmas[k])[i]);
      }
      parts.kl += loss::vib_kl(s).kl / n;
    }
    parts.lsi = loss::lsi_term(parts.kl, c_raw).value;
  }
  transport::HKConfig hk;
  hk.n_bins = cfgj.value("hk_bins", hk.n_bins);
  const auto target = transport::histogram(zt, hk);
  parts.hk = transport::hk_loss(zp, target, hk, hk.bin_width()).loss;

  const auto b = loss::loss_breakdown(parts, cfg, epoch, validation);
  const json j{{"epoch", epoch},
               {"validation", validation},
               {"parts", {{"cls", parts.cls}, {"red", parts.red}, {"kl", parts.kl}, {"lsi", parts.lsi}, {"hk", parts.hk}}},
               {"terms", {{"cls", b.cls}, {"red", b.red}, {"vib", b.vib}, {"lsi", b.lsi}, {"hk", b.hk}}},
               {"lambda_hk", b.lambda_hk},
               {"total", b.total},
               {"n_rows", t.rows}};
  emit(dump(j), out_path, out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal-transport bias correction and wavelet/state-space kernels", "otdebias"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (default: unchanged)");

  std::string out_path;
  std::uint64_t seed = default_seed(42);

  // decompose
  auto* dec = app.add_subcommand("decompose", "Oriented complex Gabor decomposition of an NDT1 image");
  std::string dec_in;
  wavelet::GaborParams gabor;
  bool dec_mag = false;
  dec->add_option("--in", dec_in, "H x W image (NDT1)")->required();
  dec->add_option("--out", out_path, "Output NDT1 file (default stdout)");
  dec->add_option("--sigma", gabor.sigma, "Envelope width in pixels")->capture_default_str();
  dec->add_option("--lambda", gabor.wavelength, "Carrier wavelength in pixels")->capture_default_str();
  dec->add_option("--size", gabor.size, "Kernel size (odd)")->capture_default_str();
  dec->add_flag("--magnitude", dec_mag, "Write 4 x H x W magnitudes instead of the 8 x H x W stack");

  // scan
  auto* scn = app.add_subcommand("scan", "Selective state-space scan of a T x D sequence");
  std::string scan_in, scan_params, scan_state;
  scn->add_option("--in", scan_in, "T x D sequence (NDT1)")->required();
  scn->add_option("--params", scan_params, "JSON with A, B, C, D (scalars or per-channel), taylor_eps, delta");
  scn->add_option("--out", out_path, "Output NDT1 file (default stdout)");
  scn->add_option("--state-out", scan_state, "Also write the final state (NDT1)");

  // encode
  auto* enc = app.add_subcommand("encode", "Multi-frequency sinusoidal sky-coordinate encoding");
  std::optional<double> ra, dec_deg, theta;
  encodings::CoordEncoding coord;
  enc->add_option("--ra", ra, "Right ascension, degrees");
  enc->add_option("--dec", dec_deg, "Declination, degrees");
  enc->add_option("--theta", theta, "Encode a single coordinate");
  enc->add_option("--k", coord.k, "Frequencies per coordinate")->capture_default_str();
  enc->add_option("--omega-min", coord.omega_min, "Lowest frequency")->capture_default_str();
  enc->add_option("--omega-max", coord.omega_max, "Highest frequency")->capture_default_str();
  enc->add_flag("--normalize", coord.normalize, "Map degrees to turns before encoding");
  enc->add_option("--out", out_path, "Output file (default stdout)");

  // sinkhorn and hk share their inputs
  std::string pred_path, target_path, pred_col, target_col, plan_out;
  Binning binning;
  auto* snk = app.add_subcommand("sinkhorn", "Entropic transport plan between two binned redshift samples");
  auto* hk = app.add_subcommand("hk", "Squared Hellinger-Kantorovich distance between two redshift samples");
  for (auto* sub : {snk, hk}) {
    sub->add_option("--pred", pred_path, "CSV with the predicted sample")->required();
    sub->add_option("--target", target_path, "CSV with the target sample")->required();
    sub->add_option("--pred-column", pred_col, "Column of --pred (default: z, z_pred or z_true)");
    sub->add_option("--target-column", target_col, "Column of --target (default: z, z_true or z_pred)");
    binning.add_to(sub);
  }
  snk->add_option("--out", plan_out, "Plan as an n x n NDT1 file (default stdout)");
  hk->add_option("--out", out_path, "Output file (default stdout)");

  // hist
  auto* hst = app.add_subcommand("hist", "Normalized redshift histogram as CSV");
  std::string hist_in, hist_col;
  hst->add_option("--in", hist_in, "Input CSV")->required();
  hst->add_option("--column", hist_col, "Column (default: z, z_true or z_pred)");
  hst->add_option("--bins", binning.bins, "Histogram bins")->capture_default_str();
  hst->add_option("--zmin", binning.z_lo, "Lower edge")->capture_default_str();
  hst->add_option("--zmax", binning.z_hi, "Upper edge")->capture_default_str();
  hst->add_option("--out", out_path, "Output file (default stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "Log-MSE, bias, outlier rate and per-bin metrics of a catalog");
  std::string eval_cat;
  double outlier = metrics::kDefaultOutlierThreshold;
  bool table3 = false;
  std::vector<std::string> t3_cols{"z_pred_mse_only", "z_pred_color", "z_pred_hk", "z_pred_color_hk"};
  ev->add_option("--catalog", eval_cat, "Catalog CSV with z_true and z_pred")->required();
  ev->add_option("--outlier-thresh", outlier, "Outlier threshold on |dz| / (1 + z)")->capture_default_str();
  ev->add_flag("--table3", table3, "Compare four prediction columns side by side");
  ev->add_option("--columns", t3_cols, "The four prediction columns for --table3")->expected(4);
  ev->add_option("--out", out_path, "Output file (default stdout)");

  // loss-eval
  auto* le = app.add_subcommand("loss-eval", "Term-by-term multi-task loss of a prediction file");
  std::string le_pred, le_cfg;
  le->add_option("--pred", le_pred, "CSV with z_true, z_pred and optional g_r, class_true, p_k, mu_k, sigma_k")
      ->required();
  le->add_option("--cfg", le_cfg, "JSON loss configuration");
  le->add_option("--out", out_path, "Output file (default stdout)");

  // schedule
  auto* sch = app.add_subcommand("schedule", "Learning-rate and HK-weight schedule as CSV");
  loss::ScheduleState sched;
  loss::LossConfig lcfg;
  int epochs = 120;
  sch->add_option("--epochs", epochs, "Total epochs T")->capture_default_str();
  sch->add_option("--warmup", sched.t_w, "Warmup epochs")->capture_default_str();
  sch->add_option("--phi", sched.phi, "Fraction of the half cosine period")->capture_default_str();
  sch->add_option("--eta-min", sched.eta_min)->capture_default_str();
  sch->add_option("--eta-max", sched.eta_max)->capture_default_str();
  sch->add_option("--eta-init", sched.eta_init)->capture_default_str();
  sch->add_option("--lambda-hk", lcfg.lambda_hk)->capture_default_str();
  sch->add_option("--hk-start", lcfg.hk_start_epoch)->capture_default_str();
  sch->add_option("--hk-ramp", lcfg.ramp_epochs)->capture_default_str();
  sch->add_option("--out", out_path, "Output file (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Synthetic catalog under a selection function");
  std::string selection = "logistic:z0=0.8,k=6";
  std::size_t sim_n = 10000;
  sim->add_option("--selection", selection, "none | logistic:z0=,k= | color:c0=,k=,floor= | product:... | step:z_cut=")
      ->capture_default_str();
  sim->add_option("--n", sim_n, "Candidate draws")->capture_default_str();
  sim->add_option("--seed", seed, "Random seed (default OTDEBIAS_SEED or 42)");
  sim->add_option("--out", out_path, "Catalog CSV (default stdout); a JSON summary then goes to stdout");

  // recalibrate
  auto* rec = app.add_subcommand("recalibrate", "Move an observed redshift histogram toward a target by HK descent");
  std::string obs_path, tgt_path, obs_col, tgt_col;
  biaslab::RecalibrateOptions ropt;
  rec->add_option("--obs", obs_path, "Observed sample CSV")->required();
  rec->add_option("--target", tgt_path, "Target sample CSV")->required();
  rec->add_option("--obs-column", obs_col, "Column of --obs (default: z, z_true or z_pred)");
  rec->add_option("--target-column", tgt_col, "Column of --target (default: z, z_true or z_pred)");
  rec->add_option("--steps", ropt.steps)->capture_default_str();
  rec->add_option("--lr", ropt.lr)->capture_default_str();
  binning.add_to(rec);
  rec->add_option("--out", out_path, "Output file (default stdout)");

  // ablate
  auto* abl = app.add_subcommand("ablate", "Four-way loss ablation (mse_only, color, hk, color_hk) on a catalog");
  std::string abl_cat;
  biaslab::AblationConfig acfg;
  bool abl_csv = false;
  abl->add_option("--catalog", abl_cat, "Catalog with z_true, g_r and observed")->required();
  abl->add_option("--bootstrap", acfg.bootstrap_resamples, "Paired bootstrap resamples")->capture_default_str();
  abl->add_option("--bootstrap-seed", acfg.bootstrap_seed)->capture_default_str();
  abl->add_option("--max-steps", acfg.max_steps)->capture_default_str();
  abl->add_flag("--csv", abl_csv, "Emit CSV instead of JSON");
  std::string abl_preds;
  abl->add_option("--predictions", abl_preds, "Also write per-row predictions of every mode (eval --table3 input)");
  abl->add_option("--out", out_path, "Output file (default stdout)");

  // gen-galaxy
  auto* gg = app.add_subcommand("gen-galaxy", "Render a synthetic galaxy to NDT1");
  io::SyntheticGalaxySpec gspec;
  std::string kind = "spiral";
  gg->add_option("--kind", kind, "spiral | elliptical | ring")->capture_default_str();
  gg->add_option("--arms", gspec.arms)->capture_default_str();
  gg->add_option("--pitch", gspec.pitch)->capture_default_str();
  gg->add_option("--axis-ratio", gspec.axis_ratio)->capture_default_str();
  gg->add_option("--angle", gspec.angle)->capture_default_str();
  gg->add_option("--radius", gspec.radius)->capture_default_str();
  gg->add_option("--sersic-n", gspec.sersic_n)->capture_default_str();
  gg->add_option("--noise", gspec.noise_sigma)->capture_default_str();
  gg->add_option("--resolution", gspec.resolution)->capture_default_str();
  gg->add_option("--seed", seed, "Noise seed (default OTDEBIAS_SEED or 42)");
  gg->add_option("--out", out_path, "Output NDT1 file (default stdout)");

  // selftest
  auto* st = app.add_subcommand("selftest", "Run the worked-example corpus");
  std::string corpus = docsbook::default_corpus_dir().string();
  std::string op_filter;
  st->add_option("--corpus", corpus, "Directory of example JSON files")->capture_default_str();
  st->add_option("--op", op_filter, "Only cases of this operation");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  const std::size_t saved_threads = max_threads();
  if (threads > 0) set_max_threads(threads);
  struct Restore {
    std::size_t n;
    ~Restore() { set_max_threads(n); }
  } restore{saved_threads};

  try {
    if (*dec) {
      const Tensor image = load_ndt(dec_in);
      if (image.rank() != 2) throw ShapeError("decompose expects an H x W image");
      const auto stack = wavelet::decompose(image, wavelet::make_gabor_bank(gabor));
      emit(ndt_bytes(dec_mag ? wavelet::magnitude_maps(stack) : stack.maps), out_path, out);
      return kExitOk;
    }
    if (*scn) {
      const Tensor x = load_ndt(scan_in);
      if (x.rank() != 2) throw ShapeError("scan expects a T x D sequence");
      const std::size_t T = x.extent(0), D = x.extent(1);
      const json p = scan_params.empty() ? json::object() : read_json_file(scan_params);
      const auto get = [&](const char* k) { return p.contains(k) ? p.at(k) : json(); };
      ssm::SSMParams params{broadcast(get("A"), D, -0.5, "A"), broadcast(get("B"), D, 1.0, "B"),
                            broadcast(get("C"), D, 1.0, "C"), broadcast(get("D"), D, 0.0, "D"),
                            p.value("taylor_eps", 1e-6)};
      Tensor delta({T, D}, 1.0);
      if (p.contains("delta") && p.at("delta").is_number()) delta = Tensor({T, D}, p.at("delta").get<double>());
      else if (p.contains("delta")) {
        const auto rows = p.at("delta").get<std::vector<std::vector<double>>>();
        if (rows.size() != T) throw ShapeError("params.delta must be T x D");
        for (std::size_t t = 0; t < T; ++t) {
          if (rows[t].size() != D) throw ShapeError("params.delta must be T x D");
          for (std::size_t d = 0; d < D; ++d) delta(t, d) = rows[t][d];
        }
      }
      const auto res = ssm::scan(x, params, delta);
      if (!scan_state.empty()) save_ndt(scan_state, res.final_state);
      emit(ndt_bytes(res.y), out_path, out);
      return kExitOk;
    }
    if (*enc) {
      json j{{"k", coord.k}, {"frequencies", coord.frequencies()}, {"normalize", coord.normalize}};
      if (theta) {
        if (ra || dec_deg) throw UsageError("--theta cannot be combined with --ra/--dec");
        j["encoding"] = encodings::encode_coord(*theta, coord).values();
      } else {
        if (!ra || !dec_deg) throw UsageError("encode needs --ra and --dec, or --theta");
        j["encoding"] = encodings::encode_sky(*ra, *dec_deg, coord).values();
      }
      emit(dump(j), out_path, out);
      return kExitOk;
    }
    if (*snk || *hk) {
      const auto cfg = binning.config();
      const auto p = transport::histogram(read_z(pred_path, pred_col, {"z", "z_pred", "z_true"}), cfg);
      const auto q = transport::histogram(read_z(target_path, target_col, {"z", "z_true", "z_pred"}), cfg);
      if (*hk) {
        const auto r = transport::hk_distance_sq(p, q, cfg);
        emit(dump({{"hk2", r.hk2},
                   {"transport", r.transport},
                   {"hellinger", r.hellinger},
                   {"raw_cost", r.raw_cost},
                   {"iterations", r.iterations},
                   {"marginal_err", r.marginal_err},
                   {"converged", r.converged}}),
             out_path, out);
        return kExitOk;
      }
      transport::SinkhornOptions opt;
      opt.eps = cfg.eps_entropic;
      opt.stop_tol = cfg.stop_tol;
      opt.max_iter = cfg.max_iter;
      const auto plan = transport::sinkhorn(p.mass, q.mass, transport::squared_distance_cost(p.centers()), opt);
      if (plan_out.empty()) {
        out << ndt_bytes(plan.plan);
      } else {
        save_ndt(plan_out, plan.plan);
        out << dump({{"transport_cost", plan.transport_cost},
                     {"entropic_cost", plan.entropic_cost},
                     {"iterations", plan.iterations_used},
                     {"marginal_err", plan.marginal_err},
                     {"converged", plan.converged}});
      }
      return kExitOk;
    }
    if (*hst) {
      const auto cfg = binning.config();
      const auto h = transport::histogram(read_z(hist_in, hist_col, {"z", "z_true", "z_pred"}), cfg);
      std::ostringstream s;
      s << "bin_lo,bin_hi,mass\n";
      for (std::size_t i = 0; i < h.bins(); ++i)
        s << io::format_double(h.edges[i]) << ',' << io::format_double(h.edges[i + 1]) << ','
          << io::format_double(h.mass[i]) << '\n';
      emit(s.str(), out_path, out);
      return kExitOk;
    }
    if (*ev) {
      if (table3) {
        std::vector<std::string> names{"z_true"};
        names.insert(names.end(), t3_cols.begin(), t3_cols.end());
        const auto t = io::read_numeric_columns(fs::path(eval_cat), names);
        std::array<std::vector<double>, 4> preds;
        for (std::size_t k = 0; k < 4; ++k) preds[k] = t.columns.at(t3_cols[k]);
        const auto tab = metrics::table3(t.columns.at("z_true"), preds, outlier);
        json reports = json::object(), improvement = json::object();
        const auto& base = tab.reports[0];
        for (std::size_t k = 0; k < 4; ++k) {
          reports[tab.labels[k]] = metrics_json(tab.reports[k]);
          const auto& r = tab.reports[k];
          json imp = json::object();
          if (base.log_mse > 0) imp["log_mse"] = metrics::relative_improvement(base.log_mse, r.log_mse);
          if (base.outlier_rate > 0) imp["outlier_rate"] = metrics::relative_improvement(base.outlier_rate, r.outlier_rate);
          if (base.bias != 0) imp["abs_bias"] = metrics::relative_improvement(std::abs(base.bias), std::abs(r.bias));
          improvement[tab.labels[k]] = imp;
        }
        emit(dump({{"labels", tab.labels}, {"reports", reports}, {"relative_improvement", improvement}}), out_path, out);
        return kExitOk;
      }
      const auto cat = io::parse_catalog(fs::path(eval_cat));
      json j = metrics_json(metrics::compute_metrics(cat.rows, outlier));
      j["catalog"] = {{"rows", cat.rows.size()}, {"errors", issues_json(cat.errors)}, {"filtered", issues_json(cat.filtered)}};
      emit(dump(j), out_path, out);
      return kExitOk;
    }
    if (*le) return cmd_loss_eval(le_pred, le_cfg, out, out_path);
    if (*sch) {
      sched.T = epochs;
      lcfg.validate();
      std::ostringstream s;
      s << "epoch,lr,lambda_hk\n";
      for (int e = 0; e <= epochs; ++e) {
        sched.t = e;
        s << e << ',' << io::format_double(loss::uba_lr(sched)) << ',' << io::format_double(loss::hk_curriculum(e, lcfg))
          << '\n';
      }
      emit(s.str(), out_path, out);
      return kExitOk;
    }
    if (*sim) {
      const auto sel = biaslab::parse_selection(selection);
      Rng rng(seed);
      const auto cat = biaslab::sample_catalog({}, sel, sim_n, rng);
      std::ostringstream s;
      io::write_catalog(s, cat.rows);
      emit(s.str(), out_path, out);
      if (!out_path.empty())
        out << dump({{"selection", sel.describe()},
                     {"seed", seed},
                     {"n", sim_n},
                     {"n_accepted", cat.n_accepted},
                     {"ks", biaslab::ks_statistic(cat.true_dist, cat.observed_dist)}});
      return kExitOk;
    }
    if (*rec) {
      const auto cfg = binning.config();
      const auto p = transport::histogram(read_z(obs_path, obs_col, {"z", "z_true", "z_pred"}), cfg);
      const auto q = transport::histogram(read_z(tgt_path, tgt_col, {"z", "z_true", "z_pred"}), cfg);
      const auto r = biaslab::hk_recalibrate(p, q, cfg, ropt);
      const double before = transport::hk_distance_sq(p, q, cfg).hk2;
      const double after = transport::hk_distance_sq(r.recovered, q, cfg).hk2;
      emit(dump({{"hk_before", before},
                 {"hk_after", after},
                 {"steps_taken", r.steps_taken},
                 {"failed", r.failed},
                 {"edges", r.recovered.edges},
                 {"observed", p.mass},
                 {"recovered", r.recovered.mass},
                 {"target", q.mass}}),
           out_path, out);
      return kExitOk;
    }
    if (*abl) {
      const auto cat = io::parse_catalog(fs::path(abl_cat));
      const auto rep = biaslab::ablation_run(cat.rows, acfg);
      if (!abl_preds.empty()) {
        std::ostringstream s;
        s << "id,z_true";
        for (const auto& l : rep.labels) s << ",z_pred_" << l;
        s << '\n';
        for (const auto& row : cat.rows) {
          s << row.id << ',' << io::format_double(row.z_true);
          for (const auto& m : rep.models)
            s << ',' << io::format_double(std::clamp(std::expm1(m.predict(*row.g_r)), acfg.hk.z_lo, acfg.hk.z_hi));
          s << '\n';
        }
        emit(s.str(), abl_preds, out);
      }
      if (abl_csv) {
        std::ostringstream s;
        s << "mode,log_mse,bias,outlier_rate,mean_diff,std_diff,ci_lo,ci_hi,significant,steps\n";
        for (std::size_t k = 0; k < 4; ++k) {
          const auto& r = rep.reports[k];
          const auto& v = rep.versus_baseline[k];
          s << rep.labels[k] << ',' << io::format_double(r.log_mse) << ',' << io::format_double(r.bias) << ','
            << io::format_double(r.outlier_rate) << ',' << io::format_double(v.mean_diff) << ','
            << io::format_double(v.std_diff) << ',' << io::format_double(v.ci_lo) << ',' << io::format_double(v.ci_hi)
            << ',' << (v.significant ? 1 : 0) << ',' << rep.steps[k] << '\n';
        }
        emit(s.str(), out_path, out);
        return kExitOk;
      }
      json modes = json::object();
      for (std::size_t k = 0; k < 4; ++k) {
        json m = metrics_json(rep.reports[k]);
        const auto& v = rep.versus_baseline[k];
        m["versus_baseline"] = {{"mean_diff", v.mean_diff}, {"std_diff", v.std_diff}, {"ci_lo", v.ci_lo},
                                {"ci_hi", v.ci_hi},         {"significant", v.significant}};
        m["steps"] = rep.steps[k];
        modes[rep.labels[k]] = m;
      }
      emit(dump({{"labels", rep.labels}, {"modes", modes}, {"n_train", rep.n_train}, {"n_eval", rep.n_eval}}), out_path,
           out);
      return kExitOk;
    }
    if (*gg) {
      gspec.kind = io::parse_galaxy_kind(kind);
      Rng rng(seed);
      emit(ndt_bytes(io::gen_galaxy(gspec, rng)), out_path, out);
      return kExitOk;
    }
    if (*st) {
      auto cases = docsbook::load_corpus(corpus);
      if (!op_filter.empty())
        cases.erase(std::remove_if(cases.begin(), cases.end(), [&](const auto& c) { return c.op != op_filter; }),
                    cases.end());
      const auto registry = full_registry();
      const auto report = docsbook::run_examples(cases, registry, docsbook::Context{&registry, corpus});
      out << report.format();
      return report.all_passed() ? kExitOk : kExitData;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "invalid parameter: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

void register_cli_handler(docsbook::Registry& registry) {
  registry.add("run_cli", [](const json& in, const docsbook::Context&) {
    static std::atomic<unsigned> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("otdebias-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir);
    struct Cleanup {
      fs::path p;
      ~Cleanup() {
        std::error_code ec;
        fs::remove_all(p, ec);
      }
    } cleanup{dir};
    if (in.contains("files"))
      for (const auto& [name, text] : in.at("files").items()) {
        std::ofstream f(dir / name, std::ios::binary);
        f << text.get<std::string>();
      }
    std::vector<std::string> argv;
    for (auto a : in.at("argv").get<std::vector<std::string>>()) {
      for (auto pos = a.find("{dir}"); pos != std::string::npos; pos = a.find("{dir}"))
        a.replace(pos, 5, dir.string());
      argv.push_back(std::move(a));
    }
    std::ostringstream out, err;
    const int code = run_cli(argv, out, err);
    json res{{"exit_code", code}, {"stdout", out.str()}, {"stderr", err.str()}};
    const json parsed = json::parse(out.str(), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      res["json"] = parsed;
    } else {
      const std::string s = out.str();
      const auto lines = static_cast<long>(std::count(s.begin(), s.end(), '\n'));
      res["csv_rows"] = std::max(0L, lines - 1);
    }
    return res;
  });
}

docsbook::Registry full_registry() {
  auto r = docsbook::default_registry();
  register_cli_handler(r);
  return r;
}

}  // namespace otdebias::cli
