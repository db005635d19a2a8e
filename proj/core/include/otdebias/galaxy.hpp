#pragma once

#include <cstddef>
#include <string>

#include "otdebias/rng.hpp"
#include "otdebias/tensor.hpp"

namespace otdebias::io {

enum class GalaxyKind { spiral, elliptical, ring };

GalaxyKind parse_galaxy_kind(const std::string& name);
std::string galaxy_kind_name(GalaxyKind kind);

/// Parametric galaxy scene on the unit square [-1, 1]^2. The scene is continuous, so rendering
/// the same spec at two resolutions samples the same picture.
struct SyntheticGalaxySpec {
  GalaxyKind kind = GalaxyKind::spiral;
  int arms = 2;
  /// Pitch angle of the logarithmic spiral arms, radians.
  double pitch = 0.35;
  /// Minor-to-major axis ratio in (0, 1].
  double axis_ratio = 1.0;
  /// Position angle of the major axis, radians.
  double angle = 0.0;
  /// Effective radius of the light profile in scene units.
  double radius = 0.35;
  double sersic_n = 1.5;
  double noise_sigma = 0.0;
  std::size_t resolution = 64;

  void validate() const;
};

/// resolution x resolution image, each pixel the mean of a 4 x 4 grid of scene samples,
/// plus i.i.d. Gaussian noise of standard deviation noise_sigma.
Tensor gen_galaxy(const SyntheticGalaxySpec& spec, Rng& rng);

}  // namespace otdebias::io
