#pragma once

#include <string>
#include <vector>

#include "otdebias/docsbook/corpus.hpp"
#include "otdebias/docsbook/oracles.hpp"
#include "otdebias/galaxy.hpp"
#include "otdebias/rng.hpp"
#include "otdebias/tensor.hpp"
#include "otdebias/transport.hpp"

namespace otdebias::docsbook::detail {

inline std::vector<double> vec(const json& j) { return j.get<std::vector<double>>(); }
inline oracle::Matrix mat(const json& j) { return j.get<oracle::Matrix>(); }

Tensor to_tensor(const oracle::Matrix& m);
oracle::Matrix to_matrix(const Tensor& t);

/// Row-normalized exponential draws: a Dirichlet(1) sample of length n.
std::vector<double> dirichlet(std::size_t n, Rng& rng);

/// Uniform draws described by {"n", "lo", "hi", "seed"}.
std::vector<double> uniform_samples(const json& spec);

/// HKConfig fields read from the inputs, library defaults otherwise.
transport::HKConfig hk_config(const json& in);

/// Histogram from {"mass": [...]} with explicit "edges" or uniform edges over [z_lo, z_hi].
transport::Histogram histogram_from(const json& in, const std::string& key, const transport::HKConfig& cfg);

/// Galaxy spec from {"kind", "arms", "pitch", "axis_ratio", "angle", "radius", "sersic_n",
/// "noise_sigma", "resolution"}.
io::SyntheticGalaxySpec galaxy_spec(const json& in);

void register_arrays(Registry& r);
void register_transport(Registry& r);
void register_losses(Registry& r);
void register_eval(Registry& r);

}  // namespace otdebias::docsbook::detail
