#include "otdebias/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include "otdebias/error.hpp"

namespace otdebias {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGoldenGamma);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (cached_normal_) {
    const double v = *cached_normal_;
    cached_normal_.reset();
    return v;
  }
  // 1 - u keeps the radius argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

Rng Rng::split(std::uint64_t stream) const {
  Rng child(0);
  child.seed_ = seed_;
  child.key_ = mix64(key_ ^ mix64(stream + kGoldenGamma));
  return child;
}

Tensor normal_sample(Rng& rng, const Shape& shape) {
  const std::size_t n = checked_element_count(shape);
  std::vector<double> data(n);
  for (double& v : data) v = rng.normal();
  return Tensor(shape, std::move(data));
}

std::uint64_t default_seed(std::uint64_t fallback) {
  const char* env = std::getenv("OTDEBIAS_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(env, &pos, 10);
    if (pos != std::char_traits<char>::length(env)) throw ParameterError("");
    return v;
  } catch (const std::exception&) {
    throw ParameterError(std::string("OTDEBIAS_SEED is not an unsigned integer: ") + env);
  }
}

}  // namespace otdebias
