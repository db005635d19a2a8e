#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>

#include "otdebias/tensor.hpp"

namespace otdebias::wavelet {

/// Gabor bank parameters, in pixels.
struct GaborParams {
  std::size_t size = 9;
  double sigma = 2.0;
  double wavelength = 4.0;
  /// Envelope aspect ratio along the rotated y axis. Unset keeps the isotropic envelope.
  std::optional<double> aspect;
  /// Subtract the real part's mean before normalizing so constant images give no response.
  bool zero_mean = true;
};

struct GaborKernel {
  double theta = 0.0;
  double sigma = 0.0;
  double wavelength = 0.0;
  std::size_t size = 0;
  Tensor real_part;  // size x size, row = y offset, column = x offset
  Tensor imag_part;
};

using GaborBank = std::array<GaborKernel, 4>;

/// Bank orientations in channel order: pi/2, pi, 3pi/2, 0.
std::array<double, 4> bank_orientations();

/// Unnormalized complex Gabor response at pixel offset (x, y).
std::complex<double> gabor_value(double theta, double sigma, double wavelength, double x, double y,
                                 std::optional<double> aspect = std::nullopt);

/// Four oriented kernels evaluated on the centered grid, then L2-normalized.
GaborBank make_gabor_bank(const GaborParams& params = {});

/// Bank parameters rescaled for an image of `resolution` pixels relative to `reference`
/// pixels, so every resolution filters the same physical scale.
GaborParams params_for_resolution(const GaborParams& base, std::size_t resolution, std::size_t reference = 64);

enum class Tree { g, h };

/// Eight directional maps: channel 2*o is the real (g-tree) response and 2*o + 1 the
/// imaginary (h-tree) response of orientation o.
struct DirectionalStack {
  Tensor maps;  // 8 x H x W
  std::array<Tree, 8> tree_labels{};
  std::array<double, 8> orientation_labels{};

  std::size_t height() const { return maps.extent(1); }
  std::size_t width() const { return maps.extent(2); }
};

/// Same-size correlation of `image` (H x W) with each kernel, reflection padded.
DirectionalStack decompose(const Tensor& image, const GaborBank& bank);

/// Per-orientation magnitude sqrt(g^2 + h^2), shape 4 x H x W.
Tensor magnitude_maps(const DirectionalStack& stack);

/// Per-orientation real (g-tree) response alone, shape 4 x H x W.
Tensor real_maps(const DirectionalStack& stack);

/// Sum of squared values of each channel of a C x H x W tensor.
std::vector<double> channel_energy(const Tensor& maps);

struct BottleneckFeatures {
  Tensor grid;  // 8 x 8 x C
  std::size_t source_resolution = 0;
  double compression_factor = 0.0;
};

/// Adaptive average pooling of each channel of a C x H x W tensor to C x out_h x out_w.
/// Cell i covers rows [floor(i*H/out_h), ceil((i+1)*H/out_h)).
Tensor adaptive_avg_pool(const Tensor& maps, std::size_t out_h, std::size_t out_w);

inline constexpr std::size_t kBottleneckExtent = 8;

/// Pools every map to 8 x 8 and records k = source_resolution / 64.
BottleneckFeatures bottleneck(const DirectionalStack& stack, std::size_t source_resolution);

/// Grid form (8 x 8 x C) of a C x 8 x 8 map tensor pooled to the bottleneck.
BottleneckFeatures bottleneck_maps(const Tensor& maps, std::size_t source_resolution);

/// Coefficient of variation (percent) of the mean absolute bottleneck activation over
/// renders of one scene at several resolutions. Each image is decomposed with the bank
/// matched to its resolution and the activation is divided by the compression factor k,
/// the gain of a unit-norm kernel stretched k times. Image extents give the resolution.
double cross_resolution_cv(std::span<const Tensor> images, const GaborParams& base = {});

/// Baseline without the bottleneck: a fixed pixel-scale bank at every resolution and the
/// mean absolute response over the full-resolution maps.
double single_scale_cv(std::span<const Tensor> images, const GaborParams& params = {});

}  // namespace otdebias::wavelet
