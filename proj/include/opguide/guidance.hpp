#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "opguide/core.hpp"

namespace opguide {

enum class KernelKind { bilateral, tv };

inline KernelKind parse_kernel(const std::string& s) {
  if (s == "bilateral") return KernelKind::bilateral;
  if (s == "tv") return KernelKind::tv;
  throw std::invalid_argument("unknown kernel: " + s);
}

inline const char* to_string(KernelKind k) { return k == KernelKind::bilateral ? "bilateral" : "tv"; }

struct KernelParams {
  KernelKind kind = KernelKind::bilateral;
  int radius = 3;               // bilateral window half-width; tv always uses the 4-neighbourhood
  double sigma_spatial = 2.0;   // pixels
  double sigma_range = 0.1;     // intensity units
  double epsilon = 1e-2;        // tv regularizer

  void validate() const {
    if (radius < 1) throw std::invalid_argument("kernel radius must be >= 1");
    if (!(sigma_spatial > 0.0) || !(sigma_range > 0.0))
      throw std::invalid_argument("kernel sigmas must be > 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("kernel epsilon must be > 0");
  }
};

struct Offset {
  int dx;
  int dy;
};

/// Sparse symmetric filter matrix W on a pixel grid. Row i holds the weights to
/// pixel i + offsets[k] (zero when that neighbour falls outside the grid).
/// Offsets are ordered by (dy, dx), so neighbour indices increase along a row.
class GuidedWeights {
 public:
  GuidedWeights(std::size_t width, std::size_t height, std::vector<Offset> offsets)
      : width_(width), height_(height), offsets_(std::move(offsets)),
        values_(width * height * offsets_.size(), 0.0) {
    opposite_.resize(offsets_.size());
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
      auto it = std::find_if(offsets_.begin(), offsets_.end(), [&](const Offset& o) {
        return o.dx == -offsets_[k].dx && o.dy == -offsets_[k].dy;
      });
      if (it == offsets_.end()) throw std::logic_error("window offsets are not symmetric");
      opposite_[k] = static_cast<std::size_t>(it - offsets_.begin());
      if (offsets_[k].dx == 0 && offsets_[k].dy == 0) self_ = k;
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return width_ * height_; }
  std::size_t window() const noexcept { return offsets_.size(); }
  const std::vector<Offset>& offsets() const noexcept { return offsets_; }
  std::size_t self_slot() const noexcept { return self_; }
  std::size_t opposite(std::size_t k) const { return opposite_[k]; }

  /// Neighbour index of pixel i through slot k, or size() if outside the grid.
  std::size_t neighbor(std::size_t i, std::size_t k) const {
    const long r = static_cast<long>(i / width_) + offsets_[k].dy;
    const long c = static_cast<long>(i % width_) + offsets_[k].dx;
    if (r < 0 || c < 0 || r >= static_cast<long>(height_) || c >= static_cast<long>(width_)) return size();
    return static_cast<std::size_t>(r) * width_ + static_cast<std::size_t>(c);
  }

  /// Slots whose offset is lexicographically positive in (dy, dx).
  bool forward(std::size_t k) const {
    return offsets_[k].dy > 0 || (offsets_[k].dy == 0 && offsets_[k].dx > 0);
  }

  double value(std::size_t i, std::size_t k) const { return values_[i * window() + k]; }

  /// Writes W(i,j) and W(j,i) together; the only way off-diagonal entries change.
  void set_pair(std::size_t i, std::size_t k, double w) {
    const std::size_t j = neighbor(i, k);
    values_[i * window() + k] = w;
    if (j != size()) values_[j * window() + opposite_[k]] = w;
  }
  void set_self(std::size_t i, double w) { values_[i * window() + self_] = w; }

  Signal apply(std::span<const double> x) const {
    check_length(x.size(), size(), "apply_W");
    Signal out(size(), 0.0);
    const std::size_t kw = window();
    for (std::size_t i = 0; i < size(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kw; ++k) {
        const std::size_t j = neighbor(i, k);
        if (j != size()) acc += values_[i * kw + k] * x[j];
      }
      out[i] = acc;
    }
    return out;
  }

  /// d = W 1_N, accumulated in the same order as apply().
  Signal row_sums() const {
    Signal d(size(), 0.0);
    const std::size_t kw = window();
    for (std::size_t i = 0; i < size(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kw; ++k)
        if (neighbor(i, k) != size()) acc += values_[i * kw + k];
      d[i] = acc;
    }
    return d;
  }

  /// Nonzero entries as (i, j, w), sorted by (i, j).
  std::vector<std::tuple<std::size_t, std::size_t, double>> triplets() const {
    std::vector<std::tuple<std::size_t, std::size_t, double>> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t k = 0; k < window(); ++k) {
        const std::size_t j = neighbor(i, k);
        const double w = value(i, k);
        if (j != size() && w != 0.0) out.emplace_back(i, j, w);
      }
    return out;
  }

  /// Largest |W(i,j) - W(j,i)| over stored pairs; zero when symmetry is exact.
  double asymmetry() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t k = 0; k < window(); ++k) {
        const std::size_t j = neighbor(i, k);
        if (j != size()) m = std::max(m, std::abs(value(i, k) - value(j, opposite_[k])));
      }
    return m;
  }

 private:
  std::size_t width_, height_;
  std::vector<Offset> offsets_;
  std::vector<std::size_t> opposite_;
  std::size_t self_ = 0;
  std::vector<double> values_;
};

namespace detail {

inline std::vector<Offset> square_window(int r) {
  std::vector<Offset> out;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) out.push_back({dx, dy});
  return out;
}

inline std::vector<Offset> cross_window() { return {{0, -1}, {-1, 0}, {0, 0}, {1, 0}, {0, 1}}; }

inline double range_distance2(const Image& g, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double d = g.data[i * g.channels + c] - g.data[j * g.channels + c];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Symmetric nonnegative weights from guidance image g.
///   bilateral: exp(-|dp|^2 / 2 sigma_s^2) * exp(-|dg|^2 / 2 sigma_r^2) over a (2r+1)^2 window
///   tv:        1 / sqrt(|dg|^2 + eps^2) over the 4-neighbourhood, self = max neighbour weight
inline GuidedWeights build_weights(const Image& g, const KernelParams& p) {
  check_image(g);
  p.validate();
  GuidedWeights w(g.width, g.height,
                  p.kind == KernelKind::bilateral ? detail::square_window(p.radius) : detail::cross_window());
  const std::size_t n = w.size();

  if (p.kind == KernelKind::bilateral) {
    const double inv_s = 1.0 / (2.0 * p.sigma_spatial * p.sigma_spatial);
    const double inv_r = 1.0 / (2.0 * p.sigma_range * p.sigma_range);
    for (std::size_t i = 0; i < n; ++i) {
      w.set_self(i, 1.0);
      for (std::size_t k = 0; k < w.window(); ++k) {
        if (!w.forward(k)) continue;
        const std::size_t j = w.neighbor(i, k);
        if (j == n) continue;
        const Offset o = w.offsets()[k];
        const double spatial = std::exp(-static_cast<double>(o.dx * o.dx + o.dy * o.dy) * inv_s);
        const double range = std::exp(-detail::range_distance2(g, i, j) * inv_r);
        w.set_pair(i, k, spatial * range);
      }
    }
  } else {
    const double eps2 = p.epsilon * p.epsilon;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < w.window(); ++k) {
        if (!w.forward(k)) continue;
        const std::size_t j = w.neighbor(i, k);
        if (j == n) continue;
        w.set_pair(i, k, 1.0 / std::sqrt(detail::range_distance2(g, i, j) + eps2));
      }
    for (std::size_t i = 0; i < n; ++i) {
      double m = 0.0;
      for (std::size_t k = 0; k < w.window(); ++k)
        if (k != w.self_slot()) m = std::max(m, w.value(i, k));
      // An isolated 1x1 grid has no neighbours; any positive self weight balances to 1.
      w.set_self(i, m > 0.0 ? m : 1.0);
    }
  }
  return w;
}

struct SinkhornResult {
  GuidedWeights weights;
  double residual;        // ||W 1 - 1||_inf of the returned weights
  std::size_t iterations; // scaling sweeps applied
  bool converged;
};

/// Symmetric Sinkhorn scaling W <- Delta^{-1/2} W Delta^{-1/2}, Delta = diag(W 1),
/// until ||W 1 - 1||_inf < tol or max_iter sweeps. Symmetry is kept exactly
/// because every off-diagonal update goes through set_pair.
inline SinkhornResult sinkhorn_balance(GuidedWeights w, double tol = 1e-8, std::size_t max_iter = 100) {
  if (!(tol > 0.0)) throw std::invalid_argument("sinkhorn tolerance must be > 0");
  const std::size_t n = w.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < w.window(); ++k)
      if (w.value(i, k) < 0.0) throw std::invalid_argument("sinkhorn_balance: negative weight");

  auto residual_of = [](const Signal& d) {
    double r = 0.0;
    for (double v : d) r = std::max(r, std::abs(v - 1.0));
    return r;
  };

  Signal d = w.row_sums();
  double res = residual_of(d);
  std::size_t it = 0;
  Signal f(n);
  while (!(res < tol) && it < max_iter) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) throw std::runtime_error("sinkhorn_balance: zero row sum");
      f[i] = 1.0 / std::sqrt(d[i]);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < w.window(); ++k) {
        if (k == w.self_slot()) {
          w.set_self(i, w.value(i, k) * (f[i] * f[i]));
        } else if (w.forward(k)) {
          const std::size_t j = w.neighbor(i, k);
          if (j != n) w.set_pair(i, k, w.value(i, k) * (f[i] * f[j]));
        }
      }
    ++it;
    d = w.row_sums();
    res = residual_of(d);
  }
  return {std::move(w), res, it, res < tol};
}

/// L = (D - W)^n with D = diag(W 1). After successful balancing D is the
/// identity up to the Sinkhorn tolerance, so L = (I - W)^n to that accuracy.
class GuidingOperator {
 public:
  GuidingOperator(GuidedWeights w, int degree = 1, bool balanced = false)
      : w_(std::make_shared<const GuidedWeights>(std::move(w))), degree_(degree), balanced_(balanced) {
    if (degree_ < 1) throw std::invalid_argument("polynomial degree must be >= 1");
    d_ = w_->row_sums();
  }

  std::size_t size() const noexcept { return w_->size(); }
  std::size_t dim_in() const noexcept { return size(); }
  std::size_t dim_out() const noexcept { return size(); }
  int degree() const noexcept { return degree_; }
  bool balanced() const noexcept { return balanced_; }
  const GuidedWeights& weights() const noexcept { return *w_; }
  const Signal& degrees() const noexcept { return d_; }

  Signal apply_W(std::span<const double> x) const { return w_->apply(x); }

  /// One application of D - W.
  Signal apply_laplacian(std::span<const double> x) const {
    Signal wx = w_->apply(x);
    for (std::size_t i = 0; i < wx.size(); ++i) wx[i] = d_[i] * x[i] - wx[i];
    return wx;
  }

  Signal apply_L(std::span<const double> x) const {
    check_length(x.size(), size(), "apply_L");
    Signal v = apply_laplacian(x);
    for (int p = 1; p < degree_; ++p) v = apply_laplacian(v);
    return v;
  }
  Signal apply(std::span<const double> x) const { return apply_L(x); }

  double energy(std::span<const double> x) const {
    check_length(x.size(), size(), "energy");
    return dot(x, apply_L(x));
  }

  LinearOperator as_operator() const { return LinearOperator::wrap(*this, true); }

 private:
  std::shared_ptr<const GuidedWeights> w_;
  int degree_;
  bool balanced_;
  Signal d_;
};

struct GuidanceBuild {
  GuidingOperator op;
  double sinkhorn_residual;
  std::size_t sinkhorn_iterations;
  bool sinkhorn_converged;
};

/// build_weights + sinkhorn_balance + Laplacian assembly in one call.
inline GuidanceBuild build_guiding_operator(const Image& g, const KernelParams& p, int degree = 1,
                                            double sinkhorn_tol = 1e-8, std::size_t sinkhorn_iters = 100) {
  SinkhornResult bal = sinkhorn_balance(build_weights(g, p), sinkhorn_tol, sinkhorn_iters);
  return {GuidingOperator(std::move(bal.weights), degree, bal.converged), bal.residual, bal.iterations,
          bal.converged};
}

/// Text triplets "i j w", one per line, sorted lexicographically.
inline void write_weight_triplets(std::ostream& os, const GuidedWeights& w) {
  const auto old = os.precision(17);
  for (const auto& [i, j, v] : w.triplets()) os << i << ' ' << j << ' ' << v << '\n';
  os.precision(old);
}

}  // namespace opguide
