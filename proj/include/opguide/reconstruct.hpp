#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "opguide/core.hpp"
#include "opguide/guidance.hpp"
#include "opguide/sampling.hpp"
#include "opguide/solver.hpp"

namespace opguide {

enum class PreMode { hr_projected, lr_filter };

inline PreMode parse_pre_mode(const std::string& s) {
  if (s == "hr" || s == "hr-projected") return PreMode::hr_projected;
  if (s == "lr-filter") return PreMode::lr_filter;
  throw std::invalid_argument("unknown pre-smoothing mode: " + s);
}

struct ReconstructionConfig {
  std::size_t factor = 4;
  std::size_t offset = 0;
  KernelParams kernel;
  int poly_degree = 1;
  double sinkhorn_tol = 1e-8;
  std::size_t sinkhorn_iters = 100;
  CgControls cg;
  double rho_pre = 0.0;
  double rho_post = 0.0;
  PreMode pre_mode = PreMode::hr_projected;
  bool adjust_dc = false;
  InitMode init = InitMode::bilinear;

  /// Throws on invalid values; returns soft warnings.
  std::vector<std::string> validate() const {
    kernel.validate();
    cg.validate();
    if (factor < 1) throw std::invalid_argument("factor must be >= 1");
    if (offset >= factor) throw std::invalid_argument("offset must be < factor");
    if (poly_degree < 1) throw std::invalid_argument("poly degree must be >= 1");
    if (!(rho_pre >= 0.0) || !(rho_post >= 0.0)) throw std::invalid_argument("rho values must be >= 0");
    std::vector<std::string> warnings;
    if (rho_pre > 1.0) warnings.push_back("rho_pre > 1 is outside the small-rho regime");
    if (rho_post > 1.0) warnings.push_back("rho_post > 1 is outside the small-rho regime");
    return warnings;
  }
};

/// s - rho S L s, for s = A^+ y. Stays in Range(S).
inline Signal pre_smooth(std::span<const double> s, const SamplingOperator& sampling, const GuidingOperator& guide,
                         double rho_pre) {
  check_length(s.size(), sampling.hr_size(), "pre_smooth");
  check_length(guide.size(), sampling.hr_size(), "pre_smooth operator");
  Signal out(s.begin(), s.end());
  if (rho_pre == 0.0) return out;
  const Signal sls = sampling.apply_projector(guide.apply_L(s));
  axpy(-rho_pre, sls, out);
  return out;
}

/// x - rho L x
inline Signal post_smooth(std::span<const double> x, const GuidingOperator& guide, double rho_post) {
  check_length(x.size(), guide.size(), "post_smooth");
  Signal out(x.begin(), x.end());
  if (rho_post == 0.0) return out;
  axpy(-rho_post, guide.apply_L(x), out);
  return out;
}

/// Shifts x by a constant so that mean(x) matches mean(y).
inline Signal adjust_dc(std::span<const double> x, std::span<const double> y, const SamplingOperator& sampling) {
  check_length(x.size(), sampling.hr_size(), "adjust_dc x");
  check_length(y.size(), sampling.lr_size(), "adjust_dc y");
  const double c = mean(y) - mean(x);
  Signal out(x.begin(), x.end());
  for (double& v : out) v += c;
  return out;
}

struct ChannelResult {
  Signal x;
  Signal target;  // y' = A s', the consistency target after pre-smoothing
  CgReport report;
};

/// Sample-consistent reconstruction of one channel given a prebuilt L.
///   s' = pre-smoothed A^+ y,   y' = A s'
///   x0 with A x0 = y',         u = CG_m(Aop, Aop x0),  Aop = (I - S) L
///   x = x0 - u, then post-smoothing and DC adjustment when enabled.
/// lr_guide is only consulted for PreMode::lr_filter.
inline ChannelResult reconstruct_channel(std::span<const double> y, const SamplingOperator& sampling,
                                         const GuidingOperator& guide, const ReconstructionConfig& cfg,
                                         const GuidingOperator* lr_guide = nullptr, const CgHooks& hooks = {}) {
  check_length(y.size(), sampling.lr_size(), "reconstruct: LR sample");
  check_length(guide.size(), sampling.hr_size(), "reconstruct: guidance");

  Signal target;
  if (cfg.pre_mode == PreMode::lr_filter && cfg.rho_pre != 0.0) {
    if (lr_guide == nullptr) throw std::invalid_argument("reconstruct: lr-filter mode needs an LR guiding operator");
    check_length(lr_guide->size(), sampling.lr_size(), "reconstruct: LR guidance");
    target = post_smooth(y, *lr_guide, cfg.rho_pre);
  } else {
    target = sampling.downsample(pre_smooth(sampling.upsample_adjoint(y), sampling, guide, cfg.rho_pre));
  }

  const Signal x0 = sampling.consistent_initial_guess(target, cfg.init);
  const LinearOperator projected = projected_operator(sampling, guide);
  const Signal b = projected.apply(x0);

  CgHooks inner = hooks;
#ifndef NDEBUG
  inner.on_iterate = [&](std::size_t k, std::span<const double> u) {
    double on_samples = 0.0;
    for (std::size_t i = 0; i < sampling.lr_size(); ++i)
      on_samples = std::max(on_samples, std::abs(u[sampling.selected_index(i)]));
    assert(on_samples <= 1e-12 * norm_inf(u) && "CG iterate left Null(S)");
    if (hooks.on_iterate) hooks.on_iterate(k, u);
  };
#endif
  CgResult cg = cg_solve(projected, b, cfg.cg, inner);

  Signal x = subtract(x0, cg.solution);
  x = post_smooth(x, guide, cfg.rho_post);
  if (cfg.adjust_dc) x = adjust_dc(x, y, sampling);

  for (double v : x)
    if (!std::isfinite(v))
      throw std::runtime_error("reconstruct: non-finite value in result (CG breakdown: " +
                               std::string(to_string(cg.report.breakdown)) + ", iterations " +
                               std::to_string(cg.report.iterations_used) + ")");
  return {std::move(x), std::move(target), std::move(cg.report)};
}

struct ReconstructionResult {
  Image image;
  std::vector<CgReport> reports;  // one per channel
  double sinkhorn_residual = 0.0;
  std::size_t sinkhorn_iterations = 0;
  bool sinkhorn_converged = false;
  std::vector<std::string> warnings;

  bool all_converged() const {
    for (const auto& r : reports)
      if (!r.converged || r.breakdown == Breakdown::indefinite) return false;
    return true;
  }
};

/// Full pipeline: builds L from the HR guidance g, then reconstructs every
/// channel of the LR image y independently with the shared operator.
inline ReconstructionResult reconstruct(const Image& y, const ReconstructionConfig& cfg, const Image& g) {
  check_image(y);
  check_image(g);
  ReconstructionResult out;
  out.warnings = cfg.validate();

  const SamplingOperator sampling(g.width, g.height, cfg.factor, cfg.offset);
  if (y.width != sampling.lr_width() || y.height != sampling.lr_height())
    throw std::invalid_argument("reconstruct: LR image is " + std::to_string(y.width) + "x" +
                                std::to_string(y.height) + ", expected " + std::to_string(sampling.lr_width()) +
                                "x" + std::to_string(sampling.lr_height()));

  GuidanceBuild hr = build_guiding_operator(g, cfg.kernel, cfg.poly_degree, cfg.sinkhorn_tol, cfg.sinkhorn_iters);
  out.sinkhorn_residual = hr.sinkhorn_residual;
  out.sinkhorn_iterations = hr.sinkhorn_iterations;
  out.sinkhorn_converged = hr.sinkhorn_converged;
  if (!hr.sinkhorn_converged)
    out.warnings.push_back("Sinkhorn balancing did not converge; using L = D - W with D = diag(W 1)");

  std::optional<GuidingOperator> lr_guide;
  if (cfg.pre_mode == PreMode::lr_filter && cfg.rho_pre != 0.0)
    lr_guide = build_guiding_operator(downsample_image(sampling, g), cfg.kernel, cfg.poly_degree, cfg.sinkhorn_tol,
                                      cfg.sinkhorn_iters)
                   .op;

  out.image = Image(g.width, g.height, y.channels);
  for (std::size_t ch = 0; ch < y.channels; ++ch) {
    ChannelResult r = reconstruct_channel(flatten(y, ch), sampling, hr.op, cfg, lr_guide ? &*lr_guide : nullptr);
    unflatten_into(out.image, ch, r.x);
    out.reports.push_back(std::move(r.report));
  }
  return out;
}

}  // namespace opguide
