#include "otdebias/docsbook/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace otdebias::docsbook::oracle {

namespace {

bool multiple_of(double v, int n) {
  const double scaled = v * n;
  return std::abs(scaled - std::round(scaled)) < 1e-9 * std::max(1, n);
}

struct Enumerator {
  std::vector<int> row_left;
  std::vector<int> col_left;
  const Matrix& cost;
  std::size_t n, m;
  double best = std::numeric_limits<double>::infinity();

  void visit(std::size_t cell, double acc) {
    if (acc >= best) return;
    if (cell == n * m) {
      best = acc;
      return;
    }
    const std::size_t i = cell / m, j = cell % m;
    const int cap = std::min(row_left[i], col_left[j]);
    // The last cell of a row or column is forced.
    int lo = 0;
    if (j == m - 1) lo = row_left[i];
    if (i == n - 1) lo = std::max(lo, col_left[j]);
    if (lo > cap) return;
    const int hi = (j == m - 1 || i == n - 1) ? lo : cap;
    for (int x = lo; x <= hi; ++x) {
      row_left[i] -= x;
      col_left[j] -= x;
      visit(cell + 1, acc + x * cost[i][j]);
      row_left[i] += x;
      col_left[j] += x;
    }
  }
};

}  // namespace

int common_denominator(std::span<const double> a, std::span<const double> b, int max_denominator) {
  for (int n = 1; n <= max_denominator; ++n) {
    const bool ok = std::all_of(a.begin(), a.end(), [&](double v) { return multiple_of(v, n); }) &&
                    std::all_of(b.begin(), b.end(), [&](double v) { return multiple_of(v, n); });
    if (ok) return n;
  }
  return 0;
}

double exact_ot(std::span<const double> a, std::span<const double> b, const Matrix& cost) {
  const int n_den = common_denominator(a, b);
  if (n_den == 0) throw std::invalid_argument("exact_ot needs rational masses with a small denominator");
  if (cost.size() != a.size()) throw std::invalid_argument("cost rows must match a");
  Enumerator e{{}, {}, cost, a.size(), b.size()};
  for (double v : a) e.row_left.push_back(static_cast<int>(std::lround(v * n_den)));
  for (double v : b) e.col_left.push_back(static_cast<int>(std::lround(v * n_den)));
  e.visit(0, 0.0);
  return e.best / n_den;
}

std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& x, double h) {
  std::vector<double> grad(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double zoh_a(double a, double delta) { return std::exp(delta * a); }

double zoh_b(double a, double b, double delta) {
  if (a == 0.0) return delta * b;
  return std::expm1(delta * a) / a * b;
}

Matrix unrolled_scan(const Matrix& x, std::span<const double> A, std::span<const double> B,
                     std::span<const double> C, std::span<const double> D, const Matrix& delta) {
  const std::size_t t_len = x.size();
  Matrix y(t_len, std::vector<double>(A.size(), 0.0));
  for (std::size_t c = 0; c < A.size(); ++c) {
    for (std::size_t t = 0; t < t_len; ++t) {
      double h = 0.0;
      for (std::size_t s = 0; s <= t; ++s) {
        double carry = 1.0;
        for (std::size_t r = s + 1; r <= t; ++r) carry *= zoh_a(A[c], delta[r][c]);
        h += carry * zoh_b(A[c], B[c], delta[s][c]) * x[s][c];
      }
      y[t][c] = C[c] * h + D[c] * x[t][c];
    }
  }
  return y;
}

std::vector<double> unrolled_final_state(const Matrix& x, std::span<const double> A, std::span<const double> B,
                                         const Matrix& delta) {
  std::vector<double> h(A.size(), 0.0);
  const std::size_t t_len = x.size();
  for (std::size_t c = 0; c < A.size(); ++c) {
    for (std::size_t s = 0; s < t_len; ++s) {
      double carry = 1.0;
      for (std::size_t r = s + 1; r < t_len; ++r) carry *= zoh_a(A[c], delta[r][c]);
      h[c] += carry * zoh_b(A[c], B[c], delta[s][c]) * x[s][c];
    }
  }
  return h;
}

std::vector<std::size_t> bin_indices(std::span<const double> values, std::span<const double> edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> out;
  for (double v : values) {
    std::size_t idx = 0;
    if (v >= edges.back()) {
      idx = bins - 1;
    } else if (v > edges.front()) {
      for (std::size_t i = 0; i < bins; ++i) {
        if (v >= edges[i] && v < edges[i + 1]) idx = i;
      }
    }
    out.push_back(idx);
  }
  return out;
}

double hellinger_sq(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    s += d * d;
  }
  return 2.0 * s;
}

Matrix correlate_mirror(const Matrix& image, const Matrix& kernel) {
  const std::size_t h = image.size(), w = image[0].size(), k = kernel.size(), r = k / 2;
  Matrix padded(h + 2 * r, std::vector<double>(w + 2 * r));
  auto mirror = [](long i, long n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
  };
  for (std::size_t i = 0; i < h + 2 * r; ++i) {
    for (std::size_t j = 0; j < w + 2 * r; ++j) {
      const long si = mirror(static_cast<long>(i) - static_cast<long>(r), static_cast<long>(h));
      const long sj = mirror(static_cast<long>(j) - static_cast<long>(r), static_cast<long>(w));
      padded[i][j] = image[static_cast<std::size_t>(si)][static_cast<std::size_t>(sj)];
    }
  }
  Matrix out(h, std::vector<double>(w, 0.0));
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) acc += kernel[u][v] * padded[i + u][j + v];
      out[i][j] = acc;
    }
  }
  return out;
}

double gabor_real(double theta, double sigma, double wavelength, double x, double y) {
  const double u = x * std::cos(theta) + y * std::sin(theta);
  const double v = -x * std::sin(theta) + y * std::cos(theta);
  return std::exp(-(u * u + v * v) / (2 * sigma * sigma)) * std::cos(2 * std::numbers::pi * u / wavelength);
}

double gabor_imag(double theta, double sigma, double wavelength, double x, double y) {
  const double u = x * std::cos(theta) + y * std::sin(theta);
  const double v = -x * std::sin(theta) + y * std::cos(theta);
  return std::exp(-(u * u + v * v) / (2 * sigma * sigma)) * std::sin(2 * std::numbers::pi * u / wavelength);
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double ks_from_masses(std::span<const double> a, std::span<const double> b) {
  double fa = 0.0, fb = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    fa += a[i];
    fb += b[i];
    worst = std::max(worst, std::abs(fa - fb));
  }
  return worst;
}

}  // namespace otdebias::docsbook::oracle
