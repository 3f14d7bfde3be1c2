#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace opguide {

/// Flat real-valued signal on N vertices (one channel of an image, or any vector).
using Signal = std::vector<double>;

/// Dense raster, row-major, channel-interleaved. Intensities are dimensionless.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
      : width(w), height(h), channels(c), data(w * h * c, fill) {
    if (c != 1 && c != 3) throw std::invalid_argument("Image: channels must be 1 or 3");
  }

  std::size_t pixels() const noexcept { return width * height; }

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data[(row * width + col) * channels + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data[(row * width + col) * channels + ch];
  }

  bool operator==(const Image&) const = default;
};

inline void check_image(const Image& img) {
  if (img.width == 0 || img.height == 0) throw std::invalid_argument("image is empty");
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("image must have 1 or 3 channels");
  if (img.data.size() != img.width * img.height * img.channels)
    throw std::invalid_argument("image data length does not match its shape");
  for (double v : img.data)
    if (!std::isfinite(v)) throw std::invalid_argument("image contains non-finite values");
}

inline void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
}

inline Signal flatten(const Image& img, std::size_t channel) {
  if (channel >= img.channels) throw std::out_of_range("flatten: channel out of range");
  Signal out(img.pixels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data[i * img.channels + channel];
  return out;
}

inline void unflatten_into(Image& img, std::size_t channel, std::span<const double> v) {
  if (channel >= img.channels) throw std::out_of_range("unflatten: channel out of range");
  check_length(v.size(), img.pixels(), "unflatten");
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i * img.channels + channel] = v[i];
}

inline Image unflatten(std::span<const double> v, std::size_t width, std::size_t height) {
  Image img(width, height, 1);
  unflatten_into(img, 0, v);
  return img;
}

/// Inner product with a fixed left-to-right summation order.
inline double dot(std::span<const double> u, std::span<const double> v) {
  check_length(v.size(), u.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// y <- y + a*x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Signal subtract(std::span<const double> a, std::span<const double> b) {
  check_length(b.size(), a.size(), "subtract");
  Signal out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

/// Anything that maps a vector of dim_in() to a vector of dim_out().
template <typename Op>
concept LinearMap = requires(const Op& op, std::span<const double> v) {
  { op.dim_in() } -> std::convertible_to<std::size_t>;
  { op.dim_out() } -> std::convertible_to<std::size_t>;
  { op.apply(v) } -> std::convertible_to<Signal>;
};

/// Type-erased matrix-free operator. `symmetric` is a declaration the caller
/// can verify with `symmetry_defect`.
class LinearOperator {
 public:
  using ApplyFn = std::function<Signal(std::span<const double>)>;

  LinearOperator(std::size_t dim_in, std::size_t dim_out, bool symmetric, ApplyFn fn)
      : dim_in_(dim_in), dim_out_(dim_out), symmetric_(symmetric), fn_(std::move(fn)) {}

  template <LinearMap Op>
  static LinearOperator wrap(Op op, bool symmetric) {
    const std::size_t in = op.dim_in(), out = op.dim_out();
    return LinearOperator(in, out, symmetric,
                          [op = std::move(op)](std::span<const double> v) { return op.apply(v); });
  }

  std::size_t dim_in() const noexcept { return dim_in_; }
  std::size_t dim_out() const noexcept { return dim_out_; }
  bool symmetric() const noexcept { return symmetric_ && dim_in_ == dim_out_; }

  Signal apply(std::span<const double> v) const {
    check_length(v.size(), dim_in_, "LinearOperator::apply");
    Signal out = fn_(v);
    check_length(out.size(), dim_out_, "LinearOperator::apply result");
    return out;
  }
  Signal operator()(std::span<const double> v) const { return apply(v); }

 private:
  std::size_t dim_in_;
  std::size_t dim_out_;
  bool symmetric_;
  ApplyFn fn_;
};

inline LinearOperator identity_operator(std::size_t n) {
  return LinearOperator(n, n, true, [](std::span<const double> v) { return Signal(v.begin(), v.end()); });
}

inline LinearOperator diagonal_operator(Signal diag) {
  const std::size_t n = diag.size();
  return LinearOperator(n, n, true, [d = std::move(diag)](std::span<const double> v) {
    Signal out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = d[i] * v[i];
    return out;
  });
}

/// Relative symmetry defect |<Av,w> - <v,Aw>| / (|Av||w| + |v||Aw|) for one pair.
template <LinearMap Op>
double symmetry_defect(const Op& op, std::span<const double> v, std::span<const double> w) {
  const Signal av = op.apply(v);
  const Signal aw = op.apply(w);
  const double scale = norm2(av) * norm2(w) + norm2(v) * norm2(aw);
  const double diff = std::abs(dot(av, w) - dot(v, aw));
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace opguide
