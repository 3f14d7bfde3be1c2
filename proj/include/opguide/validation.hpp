#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "opguide/core.hpp"
#include "opguide/guidance.hpp"
#include "opguide/sampling.hpp"

namespace opguide {

inline constexpr std::size_t kDenseLimit = 4096;

class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double smallest_singular_value)
      : std::runtime_error(what + " (smallest singular value " + std::to_string(smallest_singular_value) + ")"),
        smallest_(smallest_singular_value) {}
  double smallest_singular_value() const noexcept { return smallest_; }

 private:
  double smallest_;
};

/// Materialized L, sampling mask and zero-filled sample s = A^+ y.
struct DenseSystem {
  std::size_t n = 0;
  Eigen::MatrixXd laplacian;
  std::vector<bool> sampled;
  Eigen::VectorXd sample;

  /// Non-sampled indices first, sampled second: the basis where S = diag(0, I).
  std::vector<std::size_t> block_order() const {
    std::vector<std::size_t> order;
    order.reserve(n);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < n; ++i)
        if (sampled[i] == (pass == 1)) order.push_back(i);
    return order;
  }
  std::size_t free_count() const {
    std::size_t c = 0;
    for (bool b : sampled) c += b ? 0 : 1;
    return c;
  }
};

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Signal from_eigen(const Eigen::VectorXd& v) { return Signal(v.data(), v.data() + v.size()); }

/// Columns L e_j via N matrix-free applications.
template <LinearMap Op>
Eigen::MatrixXd dense_matrix(const Op& op) {
  if (op.dim_in() > kDenseLimit) throw std::invalid_argument("dense assembly limited to N <= 4096");
  Eigen::MatrixXd m(op.dim_out(), op.dim_in());
  Signal e(op.dim_in(), 0.0);
  for (std::size_t j = 0; j < op.dim_in(); ++j) {
    e[j] = 1.0;
    const Signal col = op.apply(e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return m;
}

inline DenseSystem assemble_dense(const GuidingOperator& guide, const SamplingOperator& sampling,
                                  std::span<const double> y = {}) {
  check_length(guide.size(), sampling.hr_size(), "assemble_dense");
  if (guide.size() > kDenseLimit) throw std::invalid_argument("dense assembly limited to N <= 4096");
  DenseSystem sys;
  sys.n = guide.size();
  sys.laplacian = dense_matrix(guide);
  sys.sampled.resize(sys.n);
  for (std::size_t i = 0; i < sys.n; ++i) sys.sampled[i] = sampling.is_sampled(i);
  sys.sample = y.empty() ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.n))
                         : to_eigen(sampling.upsample_adjoint(y));
  return sys;
}

namespace detail {

inline double smallest_singular_value(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().minCoeff();
}

// Pivoted LDL^T solve; rejects pivots below 1e-12 * ||m||_inf.
inline Eigen::MatrixXd guarded_solve(const Eigen::MatrixXd& m, const Eigen::MatrixXd& rhs, const char* what) {
  Eigen::LDLT<Eigen::MatrixXd> f(m);
  const double scale = m.cwiseAbs().rowwise().sum().maxCoeff();
  const double pivot = m.rows() ? f.vectorD().cwiseAbs().minCoeff() : 0.0;
  if (f.info() != Eigen::Success || !(pivot > 0.0 && pivot >= 1e-12 * scale))
    throw SingularSystemError(std::string(what) + ": matrix is singular", smallest_singular_value(m));
  return f.solve(rhs);
}

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows,
                              const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
  return out;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

struct Blocks {
  std::vector<std::size_t> free, fixed;
  Eigen::MatrixXd l11, l12, l21, l22;
  Eigen::VectorXd s2;
};

inline Blocks split(const DenseSystem& sys) {
  Blocks b;
  for (std::size_t i = 0; i < sys.n; ++i) (sys.sampled[i] ? b.fixed : b.free).push_back(i);
  b.l11 = gather(sys.laplacian, b.free, b.free);
  b.l12 = gather(sys.laplacian, b.free, b.fixed);
  b.l21 = gather(sys.laplacian, b.fixed, b.free);
  b.l22 = gather(sys.laplacian, b.fixed, b.fixed);
  b.s2 = gather(sys.sample, b.fixed);
  return b;
}

}  // namespace detail

/// Dense solve of (S + rho L) x = s.
inline Eigen::VectorXd solve_tikhonov(const DenseSystem& sys, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("solve_tikhonov: rho must be > 0");
  Eigen::MatrixXd m = rho * sys.laplacian;
  for (std::size_t i = 0; i < sys.n; ++i)
    if (sys.sampled[i]) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 1.0;
  return detail::guarded_solve(m, sys.sample, "solve_tikhonov");
}

/// x = s + u, with u the minimizer of x^T L x over Null(S): L11 u1 = -L12 s2.
inline Eigen::VectorXd solve_constrained(const DenseSystem& sys) {
  const detail::Blocks b = detail::split(sys);
  Eigen::VectorXd x = sys.sample;
  if (b.free.empty()) return x;
  const Eigen::VectorXd u1 = detail::guarded_solve(b.l11, -b.l12 * b.s2, "solve_constrained (L11)");
  for (std::size_t i = 0; i < b.free.size(); ++i)
    x(static_cast<Eigen::Index>(b.free[i])) = u1(static_cast<Eigen::Index>(i));
  return x;
}

struct SchurRow {
  double rho;
  double error;       // ||x(rho) - x*||
  double defect;      // ||x2(rho) - (s2 - rho (L/L11) s2)||
  double free_gap;    // ||x1(rho) + L11^{-1} L12 s2||
};

struct SchurReport {
  std::vector<SchurRow> rows;
  double slope_error = std::numeric_limits<double>::quiet_NaN();
  double slope_defect = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares slope of log(ys) against log(xs).
inline double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  check_length(ys.size(), xs.size(), "loglog_slope");
  const std::size_t n = xs.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Convergence of the Tikhonov solution to the constrained one as rho -> 0,
/// and of its sampled block to the first-order Schur-complement expansion.
inline SchurReport schur_limit_check(const DenseSystem& sys, std::span<const double> rhos) {
  const detail::Blocks b = detail::split(sys);
  if (b.free.empty()) throw std::invalid_argument("schur_limit_check: no unsampled pixels");

  Eigen::LDLT<Eigen::MatrixXd> f11(b.l11);
  const double scale = b.l11.cwiseAbs().rowwise().sum().maxCoeff();
  if (f11.info() != Eigen::Success || !(f11.vectorD().cwiseAbs().minCoeff() >= 1e-12 * scale))
    throw SingularSystemError("schur_limit_check: L11 is singular", detail::smallest_singular_value(b.l11));

  const Eigen::MatrixXd schur = b.l22 - b.l21 * f11.solve(b.l12);
  const Eigen::VectorXd x1_limit = -f11.solve(b.l12 * b.s2);
  const Eigen::VectorXd x_star = solve_constrained(sys);
  const Eigen::VectorXd schur_s2 = schur * b.s2;

  SchurReport rep;
  std::vector<double> rs, es, ds;
  for (double rho : rhos) {
    const Eigen::VectorXd x = solve_tikhonov(sys, rho);
    const Eigen::VectorXd x1 = detail::gather(x, b.free);
    const Eigen::VectorXd x2 = detail::gather(x, b.fixed);
    SchurRow row{rho, (x - x_star).norm(), (x2 - (b.s2 - rho * schur_s2)).norm(), (x1 - x1_limit).norm()};
    rep.rows.push_back(row);
    rs.push_back(rho);
    es.push_back(row.error);
    ds.push_back(row.defect);
  }
  rep.slope_error = loglog_slope(rs, es);
  rep.slope_defect = loglog_slope(rs, ds);
  return rep;
}

}  // namespace opguide
