#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "opguide/core.hpp"
#include "opguide/guidance.hpp"
#include "opguide/sampling.hpp"

namespace opguide {

struct CgControls {
  std::size_t max_iter = 20;
  double rel_tol = 1e-3;
  bool record_history = false;

  void validate() const {
    if (max_iter < 1) throw std::invalid_argument("CG max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw std::invalid_argument("CG rel_tol must be > 0");
  }
};

enum class Breakdown { none, indefinite, stagnation };

inline const char* to_string(Breakdown b) {
  switch (b) {
    case Breakdown::none: return "none";
    case Breakdown::indefinite: return "indefinite";
    case Breakdown::stagnation: return "stagnation";
  }
  return "?";
}

struct CgReport {
  std::size_t iterations_used = 0;
  double final_rel_residual = 0.0;      // ||b - A u|| / ||b||, recomputed from u
  double recurrence_rel_residual = 0.0; // as tracked by the CG recurrence
  bool converged = false;               // recurrence reached rel_tol
  Breakdown breakdown = Breakdown::none;
  std::vector<double> residual_history; // index = iteration, entry 0 is 1
};

struct CgResult {
  Signal solution;
  CgReport report;
};

/// Optional extras for cg_solve. The preconditioner hook is unused by the
/// reconstruction pipeline.
struct CgHooks {
  std::function<void(std::size_t, std::span<const double>)> on_iterate;
  const LinearOperator* preconditioner = nullptr;
};

/// m steps of (preconditioned) conjugate gradients for op(u) = b, starting at
/// u = 0 so every iterate lies in span{b, op b, ...}. op must be symmetric PSD
/// on that Krylov space; a consistent singular system converges to its
/// Krylov-space solution.
template <LinearMap Op>
CgResult cg_solve(const Op& op, std::span<const double> b, const CgControls& ctl, const CgHooks& hooks = {}) {
  ctl.validate();
  check_length(b.size(), op.dim_in(), "cg_solve rhs");
  if (op.dim_in() != op.dim_out()) throw std::invalid_argument("cg_solve: operator must be square");

  const std::size_t n = b.size();
  CgResult res{Signal(n, 0.0), {}};
  CgReport& rep = res.report;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    rep.converged = true;
    if (ctl.record_history) rep.residual_history.push_back(0.0);
    return res;
  }

  auto precondition = [&](const Signal& r) {
    return hooks.preconditioner ? hooks.preconditioner->apply(r) : r;
  };

  Signal& u = res.solution;
  Signal r(b.begin(), b.end());
  Signal z = precondition(r);
  Signal p = z;
  double rz = dot(r, z);
  double rel = 1.0;
  if (ctl.record_history) rep.residual_history.push_back(rel);

  for (std::size_t k = 1; k <= ctl.max_iter; ++k) {
    const Signal ap = op.apply(p);
    const double pap = dot(p, ap);
    if (!(pap > 1e-14 * norm2(p) * norm2(ap))) {
      rep.breakdown = Breakdown::indefinite;
      break;
    }
    const double alpha = rz / pap;
    axpy(alpha, p, u);
    axpy(-alpha, ap, r);
    rel = norm2(r) / bnorm;
    rep.iterations_used = k;
    if (ctl.record_history) rep.residual_history.push_back(rel);
    if (hooks.on_iterate) hooks.on_iterate(k, u);
    if (rel <= ctl.rel_tol) {
      rep.converged = true;
      break;
    }
    z = precondition(r);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  const Signal au = op.apply(u);
  rep.final_rel_residual = norm2(subtract(b, au)) / bnorm;
  rep.recurrence_rel_residual = rel;
  if (rep.breakdown == Breakdown::none && std::abs(rep.final_rel_residual - rel) > 1e-8)
    rep.breakdown = Breakdown::stagnation;
  return res;
}

/// The projected operator u -> (I - S) L u. Declared symmetric: on Null(S),
/// where CG iterates from b = (I - S) v stay, it coincides with (I - S) L (I - S).
inline LinearOperator projected_operator(const SamplingOperator& sampling, const GuidingOperator& guide) {
  check_length(guide.size(), sampling.hr_size(), "projected_operator");
  return LinearOperator(guide.size(), guide.size(), true,
                        [sampling, guide](std::span<const double> u) {
                          Signal v = guide.apply_L(u);
                          sampling.project_out_samples(v);
                          return v;
                        });
}

}  // namespace opguide
