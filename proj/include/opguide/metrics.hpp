#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

#include "opguide/core.hpp"

namespace opguide {

struct NoiseSpec {
  double variance = 0.01;
  std::uint64_t seed = 0;
};

/// Adds i.i.d. N(0, variance) per sample. No clamping; that happens on save.
inline Image add_noise(const Image& img, const NoiseSpec& spec) {
  if (!(spec.variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
  Image out = img;
  if (spec.variance == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(spec.variance));
  for (double& v : out.data) v += dist(rng);
  return out;
}

struct MetricReport {
  double psnr = 0.0;  // dB; +infinity when mse == 0
  double mse = 0.0;
  double max_value = 1.0;

  bool exact() const noexcept { return mse == 0.0; }
};

inline MetricReport psnr(const Image& x, const Image& ref) {
  if (x.width != ref.width || x.height != ref.height || x.channels != ref.channels)
    throw std::invalid_argument("psnr: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - ref.data[i];
    acc += d * d;
  }
  MetricReport m;
  m.mse = x.data.empty() ? 0.0 : acc / static_cast<double>(x.data.size());
  m.psnr = m.mse == 0.0 ? std::numeric_limits<double>::infinity()
                        : 10.0 * std::log10(m.max_value * m.max_value / m.mse);
  return m;
}

}  // namespace opguide
