#include "otdebias/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "otdebias/error.hpp"
#include "otdebias/parallel.hpp"
#include "otdebias/stats.hpp"

namespace otdebias::wavelet {

namespace {

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<std::size_t>(i);
}

void correlate_reflect(const Tensor& image, const Tensor& kernel, std::span<double> out) {
  const std::size_t h = image.extent(0), w = image.extent(1);
  const std::size_t ks = kernel.extent(0);
  const auto radius = static_cast<std::ptrdiff_t>(ks / 2);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t u = -radius; u <= radius; ++u) {
        const std::size_t rr = reflect(static_cast<std::ptrdiff_t>(r) + u, h);
        const std::size_t krow = static_cast<std::size_t>(u + radius);
        for (std::ptrdiff_t v = -radius; v <= radius; ++v) {
          const std::size_t cc = reflect(static_cast<std::ptrdiff_t>(c) + v, w);
          acc += image(rr, cc) * kernel(krow, static_cast<std::size_t>(v + radius));
        }
      }
      out[r * w + c] = acc;
    }
  }
}

double mean_abs(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += std::abs(v);
  return s / static_cast<double>(values.size());
}

std::size_t square_resolution(const Tensor& image) {
  if (image.rank() != 2 || image.extent(0) != image.extent(1)) {
    throw ShapeError("cross-resolution inputs must be square H x W images");
  }
  return image.extent(0);
}

}  // namespace

std::array<double, 4> bank_orientations() {
  constexpr double pi = std::numbers::pi;
  return {pi / 2.0, pi, 3.0 * pi / 2.0, 0.0};
}

std::complex<double> gabor_value(double theta, double sigma, double wavelength, double x, double y,
                                 std::optional<double> aspect) {
  const double xr = x * std::cos(theta) + y * std::sin(theta);
  const double yr = -x * std::sin(theta) + y * std::cos(theta);
  const double gamma = aspect.value_or(1.0);
  const double envelope = std::exp(-(xr * xr + gamma * gamma * yr * yr) / (2.0 * sigma * sigma));
  const double phase = 2.0 * std::numbers::pi * xr / wavelength;
  return {envelope * std::cos(phase), envelope * std::sin(phase)};
}

GaborBank make_gabor_bank(const GaborParams& params) {
  if (params.size % 2 == 0) throw ParameterError("Gabor kernel size must be odd");
  if (!(params.sigma > 0.0) || !(params.wavelength > 0.0)) {
    throw ParameterError("Gabor sigma and wavelength must be positive");
  }
  if (params.aspect && !(*params.aspect > 0.0)) throw ParameterError("Gabor aspect ratio must be positive");

  const std::size_t n = params.size;
  const auto radius = static_cast<double>(n / 2);
  GaborBank bank;
  const auto thetas = bank_orientations();
  for (std::size_t o = 0; o < 4; ++o) {
    std::vector<double> re(n * n), im(n * n);
    for (std::size_t row = 0; row < n; ++row) {
      for (std::size_t col = 0; col < n; ++col) {
        const auto g = gabor_value(thetas[o], params.sigma, params.wavelength, static_cast<double>(col) - radius,
                                   static_cast<double>(row) - radius, params.aspect);
        re[row * n + col] = g.real();
        im[row * n + col] = g.imag();
      }
    }
    if (params.zero_mean) {
      double m = 0.0;
      for (double v : re) m += v;
      m /= static_cast<double>(re.size());
      for (double& v : re) v -= m;
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) norm += re[i] * re[i] + im[i] * im[i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < re.size(); ++i) {
      re[i] /= norm;
      im[i] /= norm;
    }
    bank[o] = GaborKernel{thetas[o], params.sigma, params.wavelength, n, Tensor({n, n}, std::move(re)),
                          Tensor({n, n}, std::move(im))};
  }
  return bank;
}

GaborParams params_for_resolution(const GaborParams& base, std::size_t resolution, std::size_t reference) {
  if (resolution == 0 || reference == 0) throw ParameterError("resolution must be positive");
  const double k = static_cast<double>(resolution) / static_cast<double>(reference);
  GaborParams p = base;
  p.sigma = base.sigma * k;
  p.wavelength = base.wavelength * k;
  const auto half = static_cast<std::size_t>(std::lround(static_cast<double>(base.size / 2) * k));
  p.size = 2 * std::max<std::size_t>(half, 1) + 1;
  return p;
}

DirectionalStack decompose(const Tensor& image, const GaborBank& bank) {
  if (image.rank() != 2) throw ShapeError("decompose expects an H x W image");
  const std::size_t h = image.extent(0), w = image.extent(1);
  const std::size_t ks = bank[0].size;
  for (const auto& k : bank) {
    if (k.size != ks) throw ShapeError("all bank kernels must share one size");
  }
  if (h < ks || w < ks) throw ShapeError("image is smaller than the kernel");

  DirectionalStack stack;
  stack.maps = Tensor({8, h, w}, 0.0);
  auto data = stack.maps.data();
  const std::size_t plane = h * w;
  parallel_for(8, [&](std::size_t m) {
    const auto& kernel = bank[m / 2];
    correlate_reflect(image, m % 2 == 0 ? kernel.real_part : kernel.imag_part, data.subspan(m * plane, plane));
  });
  for (std::size_t m = 0; m < 8; ++m) {
    stack.tree_labels[m] = m % 2 == 0 ? Tree::g : Tree::h;
    stack.orientation_labels[m] = bank[m / 2].theta;
  }
  return stack;
}

Tensor magnitude_maps(const DirectionalStack& stack) {
  const std::size_t h = stack.height(), w = stack.width(), plane = h * w;
  Tensor out({4, h, w}, 0.0);
  const auto src = stack.maps.data();
  for (std::size_t o = 0; o < 4; ++o) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double g = src[(2 * o) * plane + i];
      const double hv = src[(2 * o + 1) * plane + i];
      out[o * plane + i] = std::sqrt(g * g + hv * hv);
    }
  }
  return out;
}

Tensor real_maps(const DirectionalStack& stack) {
  const std::size_t h = stack.height(), w = stack.width(), plane = h * w;
  Tensor out({4, h, w}, 0.0);
  const auto src = stack.maps.data();
  for (std::size_t o = 0; o < 4; ++o) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(2 * o * plane), plane,
                out.data().begin() + static_cast<std::ptrdiff_t>(o * plane));
  }
  return out;
}

std::vector<double> channel_energy(const Tensor& maps) {
  if (maps.rank() != 3) throw ShapeError("channel_energy expects C x H x W");
  const std::size_t plane = maps.extent(1) * maps.extent(2);
  std::vector<double> energy(maps.extent(0), 0.0);
  for (std::size_t c = 0; c < energy.size(); ++c) {
    for (std::size_t i = 0; i < plane; ++i) energy[c] += maps[c * plane + i] * maps[c * plane + i];
  }
  return energy;
}

Tensor adaptive_avg_pool(const Tensor& maps, std::size_t out_h, std::size_t out_w) {
  if (maps.rank() != 3) throw ShapeError("adaptive_avg_pool expects C x H x W");
  const std::size_t c = maps.extent(0), h = maps.extent(1), w = maps.extent(2);
  if (h < out_h || w < out_w) throw ShapeError("pooling input is smaller than the output grid");
  Tensor out({c, out_h, out_w}, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const std::size_t r0 = i * h / out_h, r1 = ((i + 1) * h + out_h - 1) / out_h;
      for (std::size_t j = 0; j < out_w; ++j) {
        const std::size_t c0 = j * w / out_w, c1 = ((j + 1) * w + out_w - 1) / out_w;
        double s = 0.0;
        for (std::size_t r = r0; r < r1; ++r) {
          for (std::size_t col = c0; col < c1; ++col) s += maps(ch, r, col);
        }
        out(ch, i, j) = s / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
  }
  return out;
}

BottleneckFeatures bottleneck_maps(const Tensor& maps, std::size_t source_resolution) {
  if (maps.rank() != 3) throw ShapeError("bottleneck expects C x H x W maps");
  if (maps.extent(1) < kBottleneckExtent || maps.extent(2) < kBottleneckExtent) {
    throw ShapeError("bottleneck input extent must be at least 8");
  }
  const Tensor pooled = adaptive_avg_pool(maps, kBottleneckExtent, kBottleneckExtent);
  const std::size_t c = maps.extent(0);
  BottleneckFeatures out;
  out.grid = Tensor({kBottleneckExtent, kBottleneckExtent, c}, 0.0);
  for (std::size_t i = 0; i < kBottleneckExtent; ++i) {
    for (std::size_t j = 0; j < kBottleneckExtent; ++j) {
      for (std::size_t ch = 0; ch < c; ++ch) out.grid(i, j, ch) = pooled(ch, i, j);
    }
  }
  out.source_resolution = source_resolution;
  out.compression_factor = static_cast<double>(source_resolution) / 64.0;
  return out;
}

BottleneckFeatures bottleneck(const DirectionalStack& stack, std::size_t source_resolution) {
  return bottleneck_maps(stack.maps, source_resolution);
}

double cross_resolution_cv(std::span<const Tensor> images, const GaborParams& base) {
  if (images.size() < 2) throw ParameterError("cross_resolution_cv needs at least 2 resolutions");
  std::vector<double> activation;
  for (const auto& image : images) {
    const std::size_t res = square_resolution(image);
    const auto bank = make_gabor_bank(params_for_resolution(base, res));
    const auto features = bottleneck(decompose(image, bank), res);
    // A unit-norm kernel with k times the reference extent responds k times as strongly to the
    // same scene; dividing by k puts every resolution on the reference pixel measure.
    activation.push_back(mean_abs(features.grid.data()) / features.compression_factor);
  }
  return coefficient_of_variation_percent(activation);
}

double single_scale_cv(std::span<const Tensor> images, const GaborParams& params) {
  if (images.size() < 2) throw ParameterError("single_scale_cv needs at least 2 resolutions");
  const auto bank = make_gabor_bank(params);
  std::vector<double> activation;
  for (const auto& image : images) {
    square_resolution(image);
    activation.push_back(mean_abs(decompose(image, bank).maps.data()));
  }
  return coefficient_of_variation_percent(activation);
}

}  // namespace otdebias::wavelet
