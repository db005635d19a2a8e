// Handlers for the array substrate, the wavelet front end, the state-space core and the
// coordinate/task encodings.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "handlers_internal.hpp"
#include "otdebias/encodings.hpp"
#include "otdebias/metrics.hpp"
#include "otdebias/stats.hpp"
#include "otdebias/ssm.hpp"
#include "otdebias/wavelet.hpp"

namespace otdebias::docsbook::detail {

namespace {

double l2_diff_ratio(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

// One pixel to the right, first column replicated.
Tensor shift_right(const Tensor& img) {
  const std::size_t h = img.extent(0), w = img.extent(1);
  Tensor out({h, w}, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = img(i, j == 0 ? 0 : j - 1);
  return out;
}

wavelet::GaborParams gabor_params(const json& in) {
  wavelet::GaborParams p;
  p.size = in.value("size", p.size);
  p.sigma = in.value("sigma", p.sigma);
  p.wavelength = in.value("wavelength", p.wavelength);
  return p;
}

Tensor decompose_image(const json& spec) {
  const std::string kind = spec.at("kind");
  if (kind == "constant") {
    const std::size_t n = spec.at("size");
    return Tensor({n, n}, spec.value("value", 1.0));
  }
  if (kind == "impulse") {
    const std::size_t n = spec.at("size");
    Tensor t({n, n}, 0.0);
    t(n / 2, n / 2) = 1.0;
    return t;
  }
  Rng rng(spec.value("seed", std::uint64_t{0}));
  return io::gen_galaxy(galaxy_spec(spec), rng);
}

// The eight maps computed with the oracle convolution, channel order as in decompose.
std::vector<oracle::Matrix> oracle_stack(const Tensor& image, const wavelet::GaborBank& bank) {
  std::vector<oracle::Matrix> maps;
  const auto img = to_matrix(image);
  for (std::size_t m = 0; m < 8; ++m) {
    const auto& k = bank[m / 2];
    maps.push_back(oracle::correlate_mirror(img, to_matrix(m % 2 == 0 ? k.real_part : k.imag_part)));
  }
  return maps;
}

std::vector<double> flatten(const std::vector<oracle::Matrix>& maps) {
  std::vector<double> out;
  for (const auto& m : maps)
    for (const auto& row : m) out.insert(out.end(), row.begin(), row.end());
  return out;
}

// Per-orientation magnitude and real part from eight flattened maps.
std::pair<std::vector<double>, std::vector<double>> magnitude_and_real(std::span<const double> maps) {
  const std::size_t plane = maps.size() / 8;
  std::vector<double> mag, re;
  for (std::size_t o = 0; o < 4; ++o) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double g = maps[2 * o * plane + i], h = maps[(2 * o + 1) * plane + i];
      mag.push_back(std::sqrt(g * g + h * h));
      re.push_back(g);
    }
  }
  return {mag, re};
}

ssm::SSMParams params_from(const json& in, std::size_t d) {
  auto channel = [&](const char* key, double fallback) {
    if (!in.contains(key)) return std::vector<double>(d, fallback);
    if (in.at(key).is_array()) return vec(in.at(key));
    return std::vector<double>(d, in.at(key).get<double>());
  };
  ssm::SSMParams p;
  p.A = channel("A", -0.5);
  p.B = channel("B", 1.0);
  p.C = channel("C", 1.0);
  p.D = channel("D", 0.0);
  p.taylor_eps = in.value("eps", 1e-6);
  return p;
}

oracle::Matrix delta_from(const json& in, std::size_t t_len, std::size_t d) {
  if (!in.contains("delta")) return oracle::Matrix(t_len, std::vector<double>(d, 1.0));
  if (in.at("delta").is_number()) return oracle::Matrix(t_len, std::vector<double>(d, in.at("delta").get<double>()));
  return mat(in.at("delta"));
}

Tensor grid_4dir(const json& in) {
  const std::size_t d = in.value("D", std::size_t{2});
  const std::string kind = in.value("grid", "random");
  Tensor g({8, 8, d}, 0.0);
  if (kind == "zero") return g;
  Rng rng(in.value("seed", std::uint64_t{1}));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.normal();
  if (kind == "symmetric") {
    for (std::size_t p = 0; p < 32; ++p) {
      for (std::size_t c = 0; c < d; ++c) {
        const double avg = 0.5 * (g[p * d + c] + g[(63 - p) * d + c]);
        g[p * d + c] = g[(63 - p) * d + c] = avg;
      }
    }
  }
  return g;
}

void gated_inputs(const json& in, std::size_t trial, std::array<Tensor, 4>& dirs) {
  const std::size_t d = in.value("D", std::size_t{2});
  Rng rng(in.value("seed", std::uint64_t{3}) + 1000 * trial);
  for (auto& t : dirs) {
    t = Tensor({8, 8, d}, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  }
}

ssm::Linear gated_linear(const json& in, const char* key, std::size_t in_f, std::size_t out_f, std::uint64_t salt,
                         std::size_t trial) {
  if (in.value(key, "random") == "zero") return ssm::Linear::zeros(in_f, out_f);
  Rng rng(in.value("seed", std::uint64_t{3}) * 7919 + salt + 1000 * trial);
  return ssm::Linear::seeded_uniform(in_f, out_f, rng);
}

}  // namespace

void register_arrays(Registry& r) {
  // core arrays
  r.add("tensor_new", [](const json& in, const Context&) {
    const Tensor t(in.at("shape").get<Shape>(), in.value("fill", 0.0));
    json out{{"size", t.size()}, {"shape", t.shape()}};
    if (t.size() <= 64) out["data"] = t.values();
    return out;
  });

  r.add(
      "normal_sample",
      [](const json& in, const Context&) {
        const auto seed = in.at("seed").get<std::uint64_t>();
        Rng rng(seed);
        const Tensor t = normal_sample(rng, in.at("shape").get<Shape>());
        const double m = mean(t.data());
        double var = 0.0;
        for (double v : t.data()) var += (v - m) * (v - m);
        json out{{"mean", m}, {"variance", var / static_cast<double>(t.size())}, {"size", t.size()}};
        if (in.value("repeat", false)) {
          Rng again(seed);
          out["identical"] = normal_sample(again, in.at("shape").get<Shape>()) == t;
        }
        return out;
      },
      [](const json&, const Context&) { return json{{"mean", 0.0}, {"variance", 1.0}}; });

  // wavelet front end
  r.add(
      "make_gabor_bank",
      [](const json& in, const Context&) {
        const auto p = gabor_params(in);
        const auto bank = wavelet::make_gabor_bank(p);
        json out;
        const auto thetas = wavelet::bank_orientations();
        for (std::size_t o = 0; o < 4; ++o) {
          const auto c = wavelet::gabor_value(thetas[o], p.sigma, p.wavelength, 0.0, 0.0);
          out["center_re"].push_back(c.real());
          out["center_im"].push_back(c.imag());
          double norm = 0.0;
          for (std::size_t i = 0; i < bank[o].real_part.size(); ++i) {
            norm += bank[o].real_part[i] * bank[o].real_part[i] + bank[o].imag_part[i] * bank[o].imag_part[i];
          }
          out["norms"].push_back(std::sqrt(norm));
        }
        // Channel 3 is theta = 0 and channel 1 is theta = pi.
        double re_diff = 0.0, im_sum = 0.0;
        for (std::size_t i = 0; i < bank[3].real_part.size(); ++i) {
          re_diff = std::max(re_diff, std::abs(bank[3].real_part[i] - bank[1].real_part[i]));
          im_sum = std::max(im_sum, std::abs(bank[3].imag_part[i] + bank[1].imag_part[i]));
        }
        out["theta0_vs_pi_real_diff"] = re_diff;
        out["theta0_vs_pi_imag_sum"] = im_sum;
        return out;
      },
      [](const json& in, const Context&) {
        const auto p = gabor_params(in);
        const double r = static_cast<double>(p.size / 2);
        double re_diff = 0.0, im_sum = 0.0;
        for (std::size_t i = 0; i < p.size; ++i) {
          for (std::size_t j = 0; j < p.size; ++j) {
            const double x = static_cast<double>(j) - r, y = static_cast<double>(i) - r;
            re_diff = std::max(re_diff, std::abs(oracle::gabor_real(0.0, p.sigma, p.wavelength, x, y) -
                                                 oracle::gabor_real(std::numbers::pi, p.sigma, p.wavelength, x, y)));
            im_sum = std::max(im_sum, std::abs(oracle::gabor_imag(0.0, p.sigma, p.wavelength, x, y) +
                                               oracle::gabor_imag(std::numbers::pi, p.sigma, p.wavelength, x, y)));
          }
        }
        return json{{"theta0_vs_pi_real_diff", re_diff}, {"theta0_vs_pi_imag_sum", im_sum}};
      });

  r.add(
      "decompose",
      [](const json& in, const Context&) {
        const auto bank = wavelet::make_gabor_bank(gabor_params(in.value("bank", json::object())));
        const Tensor image = decompose_image(in.at("image"));
        const auto stack = wavelet::decompose(image, bank);
        json out;
        double mx = 0.0;
        for (double v : stack.maps.data()) mx = std::max(mx, std::abs(v));
        out["max_abs_response"] = mx;
        if (image.extent(0) <= 16) out["maps"] = stack.maps.values();
        const std::string kind = in.at("image").at("kind");
        if (kind == "impulse") {
          const std::size_t c = image.extent(0) / 2, ks = bank[0].size, rad = ks / 2;
          double err = 0.0;
          for (std::size_t m = 0; m < 8; ++m) {
            const auto& k = m % 2 == 0 ? bank[m / 2].real_part : bank[m / 2].imag_part;
            for (std::size_t i = 0; i < ks; ++i)
              for (std::size_t j = 0; j < ks; ++j)
                err = std::max(err, std::abs(stack.maps(m, c + rad - i, c + rad - j) - k(i, j)));
          }
          out["reflected_kernel_err"] = err;
        }
        if (in.at("image").contains("shift")) {
          const auto shifted = wavelet::decompose(shift_right(image), bank);
          const double mag = l2_diff_ratio(wavelet::magnitude_maps(shifted).data(),
                                           wavelet::magnitude_maps(stack).data());
          const double re = l2_diff_ratio(wavelet::real_maps(shifted).data(), wavelet::real_maps(stack).data());
          out["magnitude_rel_change"] = mag;
          out["real_rel_change"] = re;
          out["magnitude_smaller"] = mag < re;
        }
        return out;
      },
      [](const json& in, const Context&) {
        const auto bank = wavelet::make_gabor_bank(gabor_params(in.value("bank", json::object())));
        const Tensor image = decompose_image(in.at("image"));
        const auto maps = flatten(oracle_stack(image, bank));
        json out;
        if (in.at("image").contains("shift")) {
          const auto shifted = flatten(oracle_stack(shift_right(image), bank));
          const auto [m0, r0] = magnitude_and_real(maps);
          const auto [m1, r1] = magnitude_and_real(shifted);
          out["magnitude_rel_change"] = l2_diff_ratio(m1, m0);
          out["real_rel_change"] = l2_diff_ratio(r1, r0);
          return out;
        }
        double mx = 0.0;
        for (double v : maps) mx = std::max(mx, std::abs(v));
        out["max_abs_response"] = mx;
        if (image.extent(0) <= 16) out["maps"] = maps;
        return out;
      });

  r.add("bottleneck", [](const json& in, const Context&) {
    const std::size_t res = in.at("resolution");
    const double fill = in.value("fill", 1.0);
    wavelet::DirectionalStack stack;
    stack.maps = Tensor({8, res, res}, fill);
    const auto f = wavelet::bottleneck(stack, res);
    double dev = 0.0;
    for (double v : f.grid.data()) dev = std::max(dev, std::abs(v - fill));
    return json{{"k", f.compression_factor}, {"grid_shape", f.grid.shape()}, {"max_dev", dev}};
  });

  r.add("cross_resolution_cv", [](const json& in, const Context&) {
    const std::string mode = in.at("mode");
    if (mode == "series") return json{{"cv", metrics::coefficient_of_variation(vec(in.at("values")))}};
    auto spec = galaxy_spec(in.value("galaxy", json::object()));
    Rng rng(0);
    if (mode == "identical") {
      const Tensor img = io::gen_galaxy(spec, rng);
      const std::vector<Tensor> images{img, img, img};
      return json{{"cv", wavelet::cross_resolution_cv(images)}};
    }
    std::vector<Tensor> images;
    for (std::size_t res : in.value("resolutions", std::vector<std::size_t>{64, 128, 244})) {
      spec.resolution = res;
      images.push_back(io::gen_galaxy(spec, rng));
    }
    const double cv = wavelet::cross_resolution_cv(images);
    const double base = wavelet::single_scale_cv(images);
    return json{{"cv", cv}, {"baseline_cv", base}, {"below_baseline", cv < base}};
  });

  // state-space core
  r.add(
      "selective_delta",
      [](const json& in, const Context&) {
        const Tensor d = ssm::geometric_normalize(to_tensor(mat(in.at("delta_raw"))));
        json out{{"delta", to_matrix(d)}};
        for (const auto& row : to_matrix(d)) {
          double p = 1.0;
          for (double v : row) p *= v;
          out["row_products"].push_back(p);
        }
        return out;
      },
      [](const json& in, const Context&) {
        auto rows = mat(in.at("delta_raw"));
        for (auto& row : rows) {
          double mean_log = 0.0;
          for (double v : row) mean_log += std::log(v);
          mean_log /= static_cast<double>(row.size());
          for (double& v : row) v = std::exp(std::log(v) - mean_log);
        }
        return json{{"delta", rows}};
      });

  r.add(
      "discretize",
      [](const json& in, const Context&) {
        const double eps = in.value("eps", 1e-6);
        if (in.value("mode", "") == "continuity") {
          // Straddle |dA| = eps from both sides with B = delta = 1.
          const double inside = ssm::discretize(-eps * (1.0 - 1e-9), 1.0, 1.0, eps).b_bar;
          const double outside = ssm::discretize(-eps * (1.0 + 1e-9), 1.0, 1.0, eps).b_bar;
          return json{{"jump", std::abs(inside - outside)}};
        }
        const auto d = ssm::discretize(in.at("A"), in.at("B"), in.at("delta"), eps);
        return json{{"a_bar", d.a_bar}, {"b_bar", d.b_bar}};
      },
      [](const json& in, const Context&) {
        const double eps = in.value("eps", 1e-6);
        if (in.value("mode", "") == "continuity") {
          const double x = -eps;
          return json{{"jump", std::abs((1.0 + x / 2.0) - std::expm1(x) / x)}};
        }
        const double a = in.at("A"), b = in.at("B"), delta = in.at("delta");
        return json{{"a_bar", oracle::zoh_a(a, delta)}, {"b_bar", oracle::zoh_b(a, b, delta)}};
      });

  r.add(
      "scan",
      [](const json& in, const Context&) {
        const auto x = mat(in.at("x"));
        const std::size_t d = x[0].size();
        const auto res = ssm::scan(to_tensor(x), params_from(in, d), to_tensor(delta_from(in, x.size(), d)));
        return json{{"y", to_matrix(res.y)}, {"final_state", res.final_state.values()}};
      },
      [](const json& in, const Context&) {
        const auto x = mat(in.at("x"));
        const std::size_t d = x[0].size();
        const auto p = params_from(in, d);
        const auto delta = delta_from(in, x.size(), d);
        return json{{"y", oracle::unrolled_scan(x, p.A, p.B, p.C, p.D, delta)},
                    {"final_state", oracle::unrolled_final_state(x, p.A, p.B, delta)}};
      });

  r.add(
      "scan_4dir",
      [](const json& in, const Context&) {
        const Tensor grid = grid_4dir(in);
        const std::size_t d = grid.extent(2);
        const Tensor out = ssm::scan_4dir(grid, ssm::DirectionalScanConfig::zero_bias(params_from(in, d)));
        const auto dirs = ssm::split_directions(out);
        double rot = 0.0, mx = 0.0;
        for (std::size_t p = 0; p < 64; ++p)
          for (std::size_t c = 0; c < d; ++c) rot = std::max(rot, std::abs(dirs[0][p * d + c] - dirs[1][(63 - p) * d + c]));
        for (double v : out.data()) mx = std::max(mx, std::abs(v));
        return json{{"shape", out.shape()}, {"rot180_err", rot}, {"max_abs", mx}, {"dir1", dirs[0].values()}};
      },
      [](const json& in, const Context&) {
        const Tensor grid = grid_4dir(in);
        const std::size_t d = grid.extent(2);
        const auto p = params_from(in, d);
        // Row-major order and its reverse, scanned by the unrolled recurrence.
        oracle::Matrix fwd(64, std::vector<double>(d)), bwd(64, std::vector<double>(d));
        for (std::size_t s = 0; s < 64; ++s)
          for (std::size_t c = 0; c < d; ++c) {
            fwd[s][c] = grid[s * d + c];
            bwd[s][c] = grid[(63 - s) * d + c];
          }
        const oracle::Matrix ones(64, std::vector<double>(d, 1.0));
        const auto y1 = oracle::unrolled_scan(fwd, p.A, p.B, p.C, p.D, ones);
        const auto y2 = oracle::unrolled_scan(bwd, p.A, p.B, p.C, p.D, ones);
        // y2[s] sits at position 63 - s; rotating it by 180 degrees puts it back at s.
        std::vector<double> dir1;
        double rot = 0.0;
        for (std::size_t s = 0; s < 64; ++s)
          for (std::size_t c = 0; c < d; ++c) {
            dir1.push_back(y1[s][c]);
            rot = std::max(rot, std::abs(y1[s][c] - y2[s][c]));
          }
        return json{{"dir1", dir1}, {"rot180_err", rot}};
      });

  r.add(
      "gated_aggregate",
      [](const json& in, const Context&) {
        const std::size_t d = in.value("D", std::size_t{2}), out_f = in.value("out", std::size_t{3});
        const std::size_t trials = in.value("trials", std::size_t{1});
        double max_abs = 0.0, half_err = 0.0;
        std::size_t violations = 0;
        for (std::size_t t = 0; t < trials; ++t) {
          std::array<Tensor, 4> dirs;
          gated_inputs(in, t, dirs);
          const auto wg = gated_linear(in, "wg", 4 * d, out_f, 1, t);
          const auto wc = gated_linear(in, "wc", 4 * d, out_f, 2, t);
          const Tensor y = ssm::gated_aggregate(dirs, wg, wc);
          std::vector<double> concat(4 * d), ref(out_f);
          for (std::size_t p = 0; p < 64; ++p) {
            for (std::size_t k = 0; k < 4; ++k)
              for (std::size_t c = 0; c < d; ++c) concat[k * d + c] = dirs[k][p * d + c];
            wc.apply(concat, ref);
            for (std::size_t o = 0; o < out_f; ++o) {
              const double v = y[p * out_f + o];
              max_abs = std::max(max_abs, std::abs(v));
              half_err = std::max(half_err, std::abs(v - 0.5 * ref[o]));
              if (std::abs(v) > std::abs(ref[o])) ++violations;
            }
          }
        }
        return json{{"max_abs", max_abs}, {"max_half_err", half_err}, {"bound_violations", violations}};
      },
      [](const json& in, const Context&) {
        const std::size_t d = in.value("D", std::size_t{2}), out_f = in.value("out", std::size_t{3});
        const std::size_t trials = in.value("trials", std::size_t{1});
        std::size_t violations = 0;
        for (std::size_t t = 0; t < trials; ++t) {
          std::array<Tensor, 4> dirs;
          gated_inputs(in, t, dirs);
          const auto wg = gated_linear(in, "wg", 4 * d, out_f, 1, t);
          const auto wc = gated_linear(in, "wc", 4 * d, out_f, 2, t);
          for (std::size_t p = 0; p < 64; ++p) {
            for (std::size_t o = 0; o < out_f; ++o) {
              double gate = wg.bias[o], lin = wc.bias[o];
              for (std::size_t k = 0; k < 4; ++k)
                for (std::size_t c = 0; c < d; ++c) {
                  gate += wg.weight(o, k * d + c) * dirs[k][p * d + c];
                  lin += wc.weight(o, k * d + c) * dirs[k][p * d + c];
                }
              const double y = lin / (1.0 + std::exp(-gate));
              if (std::abs(y) > std::abs(lin)) ++violations;
            }
          }
        }
        return json{{"bound_violations", violations}};
      });

  r.add(
      "residual_fuse",
      [](const json& in, const Context&) {
        const auto x = vec(in.at("x")), y = vec(in.at("y"));
        const Tensor out = ssm::residual_fuse(Tensor({x.size()}, x), Tensor({y.size()}, y), in.at("g"));
        return json{{"out", out.values()}};
      },
      [](const json& in, const Context&) {
        const auto x = vec(in.at("x")), y = vec(in.at("y"));
        const double g = in.at("g");
        std::vector<double> out;
        for (std::size_t i = 0; i < x.size(); ++i) out.push_back(g * y[i] + (1.0 - g) * x[i]);
        return json{{"out", out}};
      });

  // encodings
  auto coord_encoding = [](const json& in) {
    encodings::CoordEncoding e;
    e.k = in.value("k", e.k);
    e.omega_min = in.value("omega_min", e.omega_min);
    e.omega_max = in.value("omega_max", e.omega_max);
    e.normalize = in.value("normalize", false);
    return e;
  };
  r.add(
      "encode_coord",
      [coord_encoding](const json& in, const Context&) {
        const auto e = coord_encoding(in);
        const double theta = in.at("theta");
        const Tensor v = encodings::encode_coord(theta, e);
        const std::vector<double> s(v.data().begin(), v.data().begin() + static_cast<std::ptrdiff_t>(e.k));
        const std::vector<double> c(v.data().begin() + static_cast<std::ptrdiff_t>(e.k), v.data().end());
        json out{{"sin", s}, {"cos", c}, {"frequencies", e.frequencies()}};
        if (in.contains("period_component")) {
          const std::size_t j = in.at("period_component");
          const Tensor w = encodings::encode_coord(theta + 1.0 / e.frequencies()[j], e);
          out["component_diff"] = std::max(std::abs(w[j] - v[j]), std::abs(w[e.k + j] - v[e.k + j]));
        }
        return out;
      },
      [coord_encoding](const json& in, const Context&) {
        const auto e = coord_encoding(in);
        std::vector<double> w;
        for (std::size_t i = 0; i < e.k; ++i) {
          const double frac = e.k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(e.k - 1);
          w.push_back(e.omega_min * std::pow(e.omega_max / e.omega_min, frac));
        }
        return json{{"frequencies", w}};
      });

  r.add("relate_tasks", [](const json& in, const Context&) {
    const auto grid = [](const json& j) { return j.get<std::array<std::array<double, 2>, 2>>(); };
    const auto rel = in.contains("weights") ? encodings::TaskRelation::from_weights(grid(in.at("weights")))
                                            : encodings::TaskRelation(grid(in.at("raw")));
    const auto f_cls = vec(in.at("f_cls")), f_red = vec(in.at("f_red"));
    const auto [a, b] =
        encodings::relate_tasks(Tensor({f_cls.size()}, f_cls), Tensor({f_red.size()}, f_red), rel);
    return json{{"weights", rel.weights()},
                {"R12", rel(0, 1)},
                {"R21", rel(1, 0)},
                {"f_cls_out", a.values()},
                {"f_red_out", b.values()}};
  });
}

}  // namespace otdebias::docsbook::detail
