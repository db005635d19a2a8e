#include "otdebias/galaxy.hpp"

#include <cmath>
#include <numbers>

#include "otdebias/error.hpp"

namespace otdebias::io {

namespace {

constexpr int kSupersample = 4;

double sersic_b(double n) { return 2.0 * n - 1.0 / 3.0 + 4.0 / (405.0 * n); }

double scene(const SyntheticGalaxySpec& s, double x, double y) {
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  const double xr = ca * x + sa * y;
  const double yr = (-sa * x + ca * y) / s.axis_ratio;
  const double r = std::hypot(xr, yr);
  const double rn = r / s.radius;

  switch (s.kind) {
    case GalaxyKind::elliptical:
      return std::exp(-sersic_b(s.sersic_n) * (std::pow(rn, 1.0 / s.sersic_n) - 1.0));
    case GalaxyKind::ring: {
      const double w = 0.25 * s.radius;
      const double ring = std::exp(-(r - 1.6 * s.radius) * (r - 1.6 * s.radius) / (2.0 * w * w));
      return ring + 0.6 * std::exp(-rn * rn * 8.0);
    }
    case GalaxyKind::spiral: {
      const double phi = std::atan2(yr, xr);
      const double lr = std::log(std::max(r, 1e-6) / s.radius);
      const double wave = std::cos(s.arms * (phi - lr / std::tan(s.pitch)));
      // Arms fade into the bulge instead of winding without bound at the center.
      const double contrast = 0.8 * (1.0 - std::exp(-rn * rn * 4.0));
      const double disk = std::exp(-rn);
      const double bulge = 0.8 * std::exp(-rn * rn * 12.0);
      return disk * (1.0 + contrast * wave) + bulge;
    }
  }
  return 0.0;
}

}  // namespace

GalaxyKind parse_galaxy_kind(const std::string& name) {
  if (name == "spiral") return GalaxyKind::spiral;
  if (name == "elliptical") return GalaxyKind::elliptical;
  if (name == "ring") return GalaxyKind::ring;
  throw ParameterError("unknown galaxy kind '" + name + "'");
}

std::string galaxy_kind_name(GalaxyKind kind) {
  switch (kind) {
    case GalaxyKind::spiral:
      return "spiral";
    case GalaxyKind::elliptical:
      return "elliptical";
    case GalaxyKind::ring:
      return "ring";
  }
  return "?";
}

void SyntheticGalaxySpec::validate() const {
  if (resolution < 8) throw ParameterError("galaxy resolution must be at least 8 pixels");
  if (!(axis_ratio > 0.0 && axis_ratio <= 1.0)) throw ParameterError("axis ratio must lie in (0, 1]");
  if (!(radius > 0.0)) throw ParameterError("galaxy radius must be positive");
  if (!(noise_sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
  if (kind == GalaxyKind::spiral) {
    if (arms < 1) throw ParameterError("spiral needs at least one arm");
    if (!(pitch > 0.0 && pitch < std::numbers::pi / 2)) throw ParameterError("pitch must lie in (0, pi/2)");
  }
  if (kind == GalaxyKind::elliptical && !(sersic_n > 0.0)) throw ParameterError("Sersic index must be positive");
}

Tensor gen_galaxy(const SyntheticGalaxySpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t n = spec.resolution;
  const double res = static_cast<double>(n);
  Tensor img({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int a = 0; a < kSupersample; ++a) {
        for (int b = 0; b < kSupersample; ++b) {
          const double y = 2.0 * (static_cast<double>(i) + (a + 0.5) / kSupersample) / res - 1.0;
          const double x = 2.0 * (static_cast<double>(j) + (b + 0.5) / kSupersample) / res - 1.0;
          acc += scene(spec, x, y);
        }
      }
      img(i, j) = acc / (kSupersample * kSupersample);
    }
  }
  if (spec.noise_sigma > 0.0) {
    for (double& v : img.data()) v += spec.noise_sigma * rng.normal();
  }
  return img;
}

}  // namespace otdebias::io
