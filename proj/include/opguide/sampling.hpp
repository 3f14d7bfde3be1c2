#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "opguide/core.hpp"

namespace opguide {

enum class InitMode { zero_fill, nearest, bilinear };

inline InitMode parse_init_mode(const std::string& s) {
  if (s == "zero" || s == "zero_fill") return InitMode::zero_fill;
  if (s == "nearest") return InitMode::nearest;
  if (s == "bilinear") return InitMode::bilinear;
  throw std::invalid_argument("unknown init mode: " + s);
}

/// Pure decimation A: keeps HR pixels (offset_y + k_y*r, offset_x + k_x*c).
/// Rows of A are distinct standard basis vectors, so A A^T = I and A^+ = A^T.
class SamplingOperator {
 public:
  SamplingOperator(std::size_t hr_width, std::size_t hr_height, std::size_t factor_x,
                   std::size_t factor_y, std::size_t offset_x, std::size_t offset_y)
      : hr_w_(hr_width), hr_h_(hr_height), kx_(factor_x), ky_(factor_y), ox_(offset_x), oy_(offset_y) {
    if (kx_ < 1 || ky_ < 1) throw std::invalid_argument("sampling factor must be >= 1");
    if (ox_ >= kx_ || oy_ >= ky_) throw std::invalid_argument("sampling offset must be < factor");
    if (hr_w_ <= ox_ || hr_h_ <= oy_) throw std::invalid_argument("HR grid smaller than sampling offset");
    lr_w_ = (hr_w_ - ox_ + kx_ - 1) / kx_;
    lr_h_ = (hr_h_ - oy_ + ky_ - 1) / ky_;
  }

  SamplingOperator(std::size_t hr_width, std::size_t hr_height, std::size_t factor, std::size_t offset = 0)
      : SamplingOperator(hr_width, hr_height, factor, factor, offset, offset) {}

  std::size_t hr_width() const noexcept { return hr_w_; }
  std::size_t hr_height() const noexcept { return hr_h_; }
  std::size_t lr_width() const noexcept { return lr_w_; }
  std::size_t lr_height() const noexcept { return lr_h_; }
  std::size_t hr_size() const noexcept { return hr_w_ * hr_h_; }
  std::size_t lr_size() const noexcept { return lr_w_ * lr_h_; }
  std::size_t factor_x() const noexcept { return kx_; }
  std::size_t factor_y() const noexcept { return ky_; }
  std::size_t offset_x() const noexcept { return ox_; }
  std::size_t offset_y() const noexcept { return oy_; }

  std::size_t selected_index(std::size_t lr_index) const {
    const std::size_t r = lr_index / lr_w_, c = lr_index % lr_w_;
    return (oy_ + r * ky_) * hr_w_ + (ox_ + c * kx_);
  }

  bool is_sampled(std::size_t hr_index) const {
    const std::size_t r = hr_index / hr_w_, c = hr_index % hr_w_;
    return r >= oy_ && c >= ox_ && (r - oy_) % ky_ == 0 && (c - ox_) % kx_ == 0;
  }

  /// y = A x
  Signal downsample(std::span<const double> x) const {
    check_length(x.size(), hr_size(), "downsample");
    Signal y(lr_size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[selected_index(i)];
    return y;
  }

  /// A^+ y = A^T y (zero fill).
  Signal upsample_adjoint(std::span<const double> y) const {
    check_length(y.size(), lr_size(), "upsample_adjoint");
    Signal x(hr_size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) x[selected_index(i)] = y[i];
    return x;
  }

  /// S x = A^+ A x: keeps sampled pixels, zeroes the rest.
  Signal apply_projector(std::span<const double> x) const {
    check_length(x.size(), hr_size(), "apply_projector_S");
    Signal out(hr_size(), 0.0);
    for (std::size_t i = 0; i < lr_size(); ++i) {
      const std::size_t j = selected_index(i);
      out[j] = x[j];
    }
    return out;
  }

  /// (I - S) x, in place.
  void project_out_samples(std::span<double> x) const {
    check_length(x.size(), hr_size(), "project_out_samples");
    for (std::size_t i = 0; i < lr_size(); ++i) x[selected_index(i)] = 0.0;
  }

  /// Interpolation estimate u, then x0 = u + A^+(y - A u) so that A x0 = y exactly.
  Signal consistent_initial_guess(std::span<const double> y, InitMode mode) const {
    check_length(y.size(), lr_size(), "consistent_initial_guess");
    if (mode == InitMode::zero_fill) return upsample_adjoint(y);
    Signal u(hr_size());
    for (std::size_t r = 0; r < hr_h_; ++r) {
      const auto [r0, r1, tr] = locate(r, oy_, ky_, lr_h_);
      for (std::size_t c = 0; c < hr_w_; ++c) {
        const auto [c0, c1, tc] = locate(c, ox_, kx_, lr_w_);
        double v;
        if (mode == InitMode::nearest) {
          const std::size_t rr = tr < 0.5 ? r0 : r1;
          const std::size_t cc = tc < 0.5 ? c0 : c1;
          v = y[rr * lr_w_ + cc];
        } else {
          const double top = (1.0 - tc) * y[r0 * lr_w_ + c0] + tc * y[r0 * lr_w_ + c1];
          const double bot = (1.0 - tc) * y[r1 * lr_w_ + c0] + tc * y[r1 * lr_w_ + c1];
          v = (1.0 - tr) * top + tr * bot;
        }
        u[r * hr_w_ + c] = v;
      }
    }
    for (std::size_t i = 0; i < lr_size(); ++i) u[selected_index(i)] = y[i];
    return u;
  }

  LinearOperator as_operator() const {
    return LinearOperator(hr_size(), lr_size(), false,
                          [op = *this](std::span<const double> v) { return op.downsample(v); });
  }
  LinearOperator projector_operator() const {
    return LinearOperator(hr_size(), hr_size(), true,
                          [op = *this](std::span<const double> v) { return op.apply_projector(v); });
  }

 private:
  struct Bracket {
    std::size_t lo, hi;
    double t;
  };

  // LR neighbours bracketing HR coordinate p; clamps outside the sampled span.
  static Bracket locate(std::size_t p, std::size_t offset, std::size_t k, std::size_t n) {
    if (p <= offset) return {0, 0, 0.0};
    const std::size_t q = (p - offset) / k;
    if (q >= n - 1) return {n - 1, n - 1, 0.0};
    const double t = static_cast<double>((p - offset) - q * k) / static_cast<double>(k);
    return {q, q + 1, t};
  }

  std::size_t hr_w_, hr_h_, kx_, ky_, ox_, oy_;
  std::size_t lr_w_ = 0, lr_h_ = 0;
};

/// Decimates every channel of an image.
inline Image downsample_image(const SamplingOperator& op, const Image& img) {
  check_length(img.width, op.hr_width(), "downsample_image width");
  check_length(img.height, op.hr_height(), "downsample_image height");
  Image out(op.lr_width(), op.lr_height(), img.channels);
  for (std::size_t ch = 0; ch < img.channels; ++ch) unflatten_into(out, ch, op.downsample(flatten(img, ch)));
  return out;
}

}  // namespace opguide
