#pragma once

// Synthetic scene pairs shared by the unit tests, the acceptance suite and
// the make_fixtures tool. All colors are multiples of 1/255 so the scenes
// survive 8-bit quantization unchanged.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "opguide/core.hpp"

namespace opguide::fixtures {

using Rgb = std::array<int, 3>;

inline void paint(Image& img, std::size_t r, std::size_t c, const Rgb& rgb) {
  for (std::size_t ch = 0; ch < img.channels; ++ch) img.at(r, c, ch) = rgb[ch] / 255.0;
}

inline bool in_rect(std::size_t r, std::size_t c, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  return r >= r0 && r < r1 && c >= c0 && c < c1;
}

inline bool in_disk(std::size_t r, std::size_t c, double cr, double cc, double rad) {
  const double dr = static_cast<double>(r) - cr, dc = static_cast<double>(c) - cc;
  return dr * dr + dc * dc <= rad * rad;
}

struct ScenePair {
  Image guide;
  Image truth;
};

/// 128x96 toy scene: the no-flash truth and the flash guidance share every
/// edge but not the colors (the yellow ball turns white under flash).
inline ScenePair flash_noflash_scene() {
  constexpr std::size_t W = 128, H = 96;
  ScenePair p{Image(W, H, 3), Image(W, H, 3)};
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      Rgb noflash{89, 77, 64}, flash{204, 199, 191};                       // wall
      if (r >= 62) noflash = {115, 71, 38}, flash = {179, 115, 77};        // table
      if (in_rect(r, c, 28, 76, 72, 112)) noflash = {38, 64, 153}, flash = {77, 115, 217};   // box
      if (in_rect(r, c, 44, 72, 52, 68)) noflash = {179, 31, 26}, flash = {242, 89, 77};     // cube
      if (in_disk(r, c, 44.0, 28.0, 15.0)) noflash = {217, 191, 26}, flash = {242, 242, 235}; // ball
      if (in_disk(r, c, 82.0, 100.0, 8.0)) noflash = {26, 128, 51}, flash = {64, 191, 102};   // cup
      paint(p.truth, r, c, noflash);
      paint(p.guide, r, c, flash);
    }
  return p;
}

/// 128x128 depth scene with an RGB guidance that has extra texture edges
/// (stripes, a two-tone panel) inside regions of constant depth.
inline ScenePair depth_rgb_scene() {
  constexpr std::size_t W = 128, H = 128;
  ScenePair p{Image(W, H, 3), Image(W, H, 1)};
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      int depth = 51;
      Rgb rgb = ((c / 16) % 2 == 0) ? Rgb{153, 140, 115} : Rgb{90, 100, 130};  // striped wall
      if (in_rect(r, c, 18, 70, 14, 62)) {
        depth = 140;
        rgb = r < 44 ? Rgb{200, 60, 50} : Rgb{60, 170, 80};  // two-tone panel
      }
      if (in_disk(r, c, 86.0, 86.0, 26.0)) depth = 204, rgb = {230, 210, 90};
      if (in_rect(r, c, 92, 120, 10, 50)) depth = 102, rgb = {40, 40, 60};
      p.truth.at(r, c) = depth / 255.0;
      paint(p.guide, r, c, rgb);
    }
  return p;
}

/// Random guidance with a few flat patches, for small dense-oracle fixtures.
inline Image random_guide(std::size_t w, std::size_t h, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image g(w, h, channels);
  const double split = 0.3 + 0.4 * u(rng);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const bool left = static_cast<double>(c) < split * static_cast<double>(w);
      for (std::size_t ch = 0; ch < channels; ++ch) g.at(r, c, ch) = (left ? 0.2 : 0.7) + 0.1 * u(rng);
    }
  return g;
}

inline Signal random_signal(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Signal v(n);
  for (double& x : v) x = u(rng);
  return v;
}

/// Pixels with a 4-neighbour of different value in any channel.
inline std::vector<bool> edge_map(const Image& img) {
  std::vector<bool> e(img.pixels(), false);
  auto differs = [&](std::size_t a, std::size_t b) {
    for (std::size_t ch = 0; ch < img.channels; ++ch)
      if (img.data[a * img.channels + ch] != img.data[b * img.channels + ch]) return true;
    return false;
  };
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      const std::size_t i = r * img.width + c;
      if ((c + 1 < img.width && differs(i, i + 1)) || (r + 1 < img.height && differs(i, i + img.width))) {
        e[i] = true;
        if (c + 1 < img.width && differs(i, i + 1)) e[i + 1] = true;
        if (r + 1 < img.height && differs(i, i + img.width)) e[i + img.width] = true;
      }
    }
  return e;
}

/// Chebyshev dilation of a mask by `radius` pixels.
inline std::vector<bool> dilate(const std::vector<bool>& m, std::size_t w, std::size_t h, int radius) {
  std::vector<bool> out(m.size(), false);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (!m[r * w + c]) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const long rr = static_cast<long>(r) + dy, cc = static_cast<long>(c) + dx;
          if (rr >= 0 && cc >= 0 && rr < static_cast<long>(h) && cc < static_cast<long>(w))
            out[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)] = true;
        }
    }
  return out;
}

/// Masks for the guidance-artifact check on a (guide, depth) pair:
///   texture: within 1 px of a guidance edge, more than 3 px from any depth edge
///   flat:    more than 3 px from every guidance and depth edge
struct ArtifactRegions {
  std::vector<bool> texture;
  std::vector<bool> flat;
};

inline ArtifactRegions artifact_regions(const ScenePair& scene) {
  const std::size_t w = scene.truth.width, h = scene.truth.height;
  const std::vector<bool> depth_edges = edge_map(scene.truth);
  const std::vector<bool> guide_edges = edge_map(scene.guide);
  const std::vector<bool> near_depth = dilate(depth_edges, w, h, 3);
  const std::vector<bool> near_guide = dilate(guide_edges, w, h, 1);
  const std::vector<bool> far_guide = dilate(guide_edges, w, h, 3);
  ArtifactRegions reg{std::vector<bool>(w * h), std::vector<bool>(w * h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    reg.texture[i] = near_guide[i] && !near_depth[i];
    reg.flat[i] = !far_guide[i] && !near_depth[i];
  }
  return reg;
}

/// Root-mean-square of (x - ref) over the masked pixels of channel 0.
inline double masked_rmse(const Image& x, const Image& ref, const std::vector<bool>& mask) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      const double d = x.data[i * x.channels] - ref.data[i * ref.channels];
      acc += d * d;
      ++n;
    }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

}  // namespace opguide::fixtures
