#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "opguide/fixtures.hpp"
#include "opguide/reconstruct.hpp"
#include "opguide/validation.hpp"

using namespace opguide;

namespace {

KernelParams kernel(KernelKind kind) {
  KernelParams p;
  p.kind = kind;
  p.radius = 2;
  p.sigma_spatial = 1.5;
  p.sigma_range = 0.2;
  p.epsilon = 1e-2;
  return p;
}

ReconstructionConfig exact_config(std::size_t factor, KernelKind kind) {
  ReconstructionConfig cfg;
  cfg.factor = factor;
  cfg.kernel = kernel(kind);
  cfg.cg.max_iter = 2000;
  cfg.cg.rel_tol = 1e-13;
  return cfg;
}

Eigen::MatrixXd dense_laplacian(const GuidingOperator& L) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(L.size(), L.size());
  for (const auto& [i, j, v] : L.weights().triplets()) w(i, j) = v;
  Eigen::MatrixXd l = -w;
  l.diagonal() += w.rowwise().sum();
  return l;
}

GuidingOperator two_pixel_balanced() {
  GuidedWeights w(2, 1, {{-1, 0}, {0, 0}, {1, 0}});
  w.set_self(0, 1.0);
  w.set_self(1, 1.0);
  w.set_pair(0, 2, 1.0);
  return GuidingOperator(sinkhorn_balance(std::move(w), 1e-14).weights, 1, true);
}

}  // namespace

TEST(PreSmooth, ZeroRhoIsIdentity) {
  const SamplingOperator a(6, 6, 2);
  const GuidingOperator L = build_guiding_operator(fixtures::random_guide(6, 6, 1, 1), kernel(KernelKind::tv)).op;
  const Signal s = a.upsample_adjoint(fixtures::random_signal(a.lr_size(), 2));
  EXPECT_EQ(pre_smooth(s, a, L, 0.0), s);
}

TEST(PreSmooth, StaysInRangeOfS) {
  const SamplingOperator a(8, 6, 2);
  const GuidingOperator L =
      build_guiding_operator(fixtures::random_guide(8, 6, 1, 3), kernel(KernelKind::bilateral)).op;
  const Signal s = a.upsample_adjoint(Signal(a.lr_size(), 0.7));
  const Signal out = pre_smooth(s, a, L, 0.3);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!a.is_sampled(i)) {
      EXPECT_EQ(out[i], 0.0);
    }
  EXPECT_NE(out, s);
}

TEST(PreSmooth, MatchesDenseEvaluation) {
  const SamplingOperator a(4, 4, 2);
  const GuidingOperator L =
      build_guiding_operator(fixtures::random_guide(4, 4, 1, 5), kernel(KernelKind::bilateral)).op;
  const Signal s = a.upsample_adjoint(fixtures::random_signal(a.lr_size(), 6));
  const double rho = 1e-2;
  Eigen::MatrixXd sm = Eigen::MatrixXd::Zero(16, 16);
  for (std::size_t i = 0; i < 16; ++i) sm(i, i) = a.is_sampled(i) ? 1.0 : 0.0;
  const Eigen::VectorXd ref = (Eigen::MatrixXd::Identity(16, 16) - rho * sm * dense_laplacian(L)) * to_eigen(s);
  const Signal got = pre_smooth(s, a, L, rho);
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(got[i], ref(i), 1e-13);
  EXPECT_THROW(pre_smooth(Signal(5), a, L, rho), std::invalid_argument);
}

TEST(PostSmooth, Basics) {
  const GuidingOperator L = two_pixel_balanced();
  const Signal x{0.3, 0.9};
  EXPECT_EQ(post_smooth(x, L, 0.0), x);
  const Signal ones(2, 1.0);
  const Signal po = post_smooth(ones, L, 0.5);
  EXPECT_NEAR(po[0], 1.0, 1e-8);
  EXPECT_NEAR(po[1], 1.0, 1e-8);
  // hand: (I - W) x = [(x0 - x1)/2, (x1 - x0)/2]
  const Signal got = post_smooth(x, L, 0.1);
  EXPECT_NEAR(got[0], 0.3 - 0.1 * (0.3 - 0.9) / 2, 1e-15);
  EXPECT_NEAR(got[1], 0.9 - 0.1 * (0.9 - 0.3) / 2, 1e-15);
  EXPECT_THROW(post_smooth(Signal(3), L, 0.1), std::invalid_argument);
}

TEST(AdjustDc, Examples) {
  const SamplingOperator a(4, 4, 2);
  const Signal x0(16, 0.0), y(4, 0.5);
  for (double v : adjust_dc(x0, y, a)) EXPECT_DOUBLE_EQ(v, 0.5);

  Signal x(16, 0.5);
  const Signal same = adjust_dc(x, y, a);
  EXPECT_EQ(same, x);

  const Signal xr = fixtures::random_signal(16, 7), yr = fixtures::random_signal(4, 8);
  EXPECT_NEAR(mean(adjust_dc(xr, yr, a)), mean(yr), 1e-14);
}

TEST(Reconstruct, FactorOneReturnsSample) {
  const Image g = fixtures::random_guide(7, 5, 3, 2);
  Image y(7, 5, 1);
  y.data = fixtures::random_signal(35, 3, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(1, KernelKind::bilateral);
  const ReconstructionResult r = reconstruct(y, cfg, g);
  EXPECT_EQ(r.image.data, y.data);
  EXPECT_TRUE(r.all_converged());
}

TEST(Reconstruct, FactorOneWithSmoothingIsPrePostFilter) {
  const Image g = fixtures::random_guide(6, 6, 1, 2);
  Image y(6, 6, 1);
  y.data = fixtures::random_signal(36, 3, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(1, KernelKind::tv);
  cfg.rho_pre = 0.1;
  cfg.rho_post = 0.2;
  const ReconstructionResult r = reconstruct(y, cfg, g);
  const GuidingOperator L = build_guiding_operator(g, cfg.kernel).op;
  const Signal expected = post_smooth(post_smooth(y.data, L, 0.1), L, 0.2);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(r.image.data[i], expected[i], 1e-14);
}

TEST(Reconstruct, NoiseFreeMatchesDenseConstrainedSolve) {
  for (KernelKind kind : {KernelKind::bilateral, KernelKind::tv}) {
    const Image g = fixtures::random_guide(8, 8, 1, 21);
    const SamplingOperator a(8, 8, 2);
    Image y(a.lr_width(), a.lr_height(), 1);
    y.data = fixtures::random_signal(a.lr_size(), 22, 0.0, 1.0);
    const ReconstructionConfig cfg = exact_config(2, kind);
    const ReconstructionResult r = reconstruct(y, cfg, g);
    ASSERT_TRUE(r.all_converged());

    const GuidingOperator L = build_guiding_operator(g, cfg.kernel).op;
    const Eigen::VectorXd ref = solve_constrained(assemble_dense(L, a, y.data));
    const Eigen::VectorXd got = to_eigen(r.image.data);
    EXPECT_LE((got - ref).norm() / ref.norm(), 1e-8) << to_string(kind);
    EXPECT_LE(norm_inf(subtract(a.downsample(r.image.data), y.data)), 1e-10);
  }
}

TEST(Reconstruct, EnergyOptimalAmongFeasibleSignals) {
  const Image g = fixtures::random_guide(10, 10, 1, 31);
  const SamplingOperator a(10, 10, 2);
  Image y(a.lr_width(), a.lr_height(), 1);
  y.data = fixtures::random_signal(a.lr_size(), 32, 0.0, 1.0);
  const ReconstructionConfig cfg = exact_config(2, KernelKind::bilateral);
  const Signal x = reconstruct(y, cfg, g).image.data;
  const GuidingOperator L = build_guiding_operator(g, cfg.kernel).op;
  const double ex = L.energy(x);
  for (int t = 0; t < 100; ++t) {
    Signal v = fixtures::random_signal(x.size(), 100 + t, -0.1, 0.1);
    a.project_out_samples(v);
    Signal z = x;
    axpy(1.0, v, z);
    EXPECT_FALSE(L.energy(z) <= ex - 1e-10);
  }
}

TEST(Reconstruct, EnergyDecreasesWithIterationCount) {
  const Image g = fixtures::random_guide(12, 12, 1, 41);
  const SamplingOperator a(12, 12, 3);
  Image y(a.lr_width(), a.lr_height(), 1);
  y.data = fixtures::random_signal(a.lr_size(), 42, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(3, KernelKind::tv);
  const GuidingOperator L = build_guiding_operator(g, cfg.kernel).op;
  cfg.cg.rel_tol = 1e-16;
  for (std::size_t k : {1u, 2u, 4u, 8u}) {
    cfg.cg.max_iter = k;
    const double ek = L.energy(reconstruct(y, cfg, g).image.data);
    cfg.cg.max_iter = 2 * k;
    const double e2k = L.energy(reconstruct(y, cfg, g).image.data);
    EXPECT_LE(e2k, ek + 1e-12);
  }
}

TEST(Reconstruct, PreSmoothedTargetIsHonoured) {
  const Image g = fixtures::random_guide(12, 8, 3, 3);
  const SamplingOperator a(12, 8, 2);
  const GuidingOperator L = build_guiding_operator(g, kernel(KernelKind::bilateral)).op;
  const Signal y = fixtures::random_signal(a.lr_size(), 4, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(2, KernelKind::bilateral);
  cfg.rho_pre = 0.05;
  for (InitMode init : {InitMode::zero_fill, InitMode::nearest, InitMode::bilinear}) {
    cfg.init = init;
    const ChannelResult r = reconstruct_channel(y, a, L, cfg);
    EXPECT_EQ(r.target, a.downsample(pre_smooth(a.upsample_adjoint(y), a, L, 0.05)));
    EXPECT_LE(norm_inf(subtract(a.downsample(r.x), r.target)), 1e-10 * norm_inf(r.target));
  }
}

TEST(Reconstruct, LrFilterModeSmoothsOnTheLowResolutionGrid) {
  const Image g = fixtures::random_guide(12, 12, 1, 5);
  const SamplingOperator a(12, 12, 2);
  Image y(6, 6, 1);
  y.data = fixtures::random_signal(36, 6, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(2, KernelKind::tv);
  cfg.pre_mode = PreMode::lr_filter;
  cfg.rho_pre = 0.2;
  const ReconstructionResult r = reconstruct(y, cfg, g);
  const GuidingOperator lr = build_guiding_operator(downsample_image(a, g), cfg.kernel).op;
  const Signal target = post_smooth(y.data, lr, 0.2);
  EXPECT_LE(norm_inf(subtract(a.downsample(r.image.data), target)), 1e-10);
  const GuidingOperator hr = build_guiding_operator(g, cfg.kernel).op;
  EXPECT_THROW(reconstruct_channel(y.data, a, hr, cfg, nullptr), std::invalid_argument);
}

TEST(Reconstruct, ChannelsShareTheOperator) {
  const Image g = fixtures::random_guide(10, 8, 3, 7);
  const SamplingOperator a(10, 8, 2);
  Image y(a.lr_width(), a.lr_height(), 3);
  y.data = fixtures::random_signal(y.data.size(), 8, 0.0, 1.0);
  const ReconstructionConfig cfg = exact_config(2, KernelKind::bilateral);
  const ReconstructionResult r = reconstruct(y, cfg, g);
  ASSERT_EQ(r.reports.size(), 3u);
  const GuidingOperator L = build_guiding_operator(g, cfg.kernel).op;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const ChannelResult one = reconstruct_channel(flatten(y, ch), a, L, cfg);
    EXPECT_EQ(flatten(r.image, ch), one.x);
  }
}

TEST(Reconstruct, AdjustDcMatchesSampleMean) {
  const Image g = fixtures::random_guide(8, 8, 1, 9);
  Image y(4, 4, 1);
  y.data = fixtures::random_signal(16, 10, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(2, KernelKind::tv);
  cfg.rho_post = 0.1;
  cfg.adjust_dc = true;
  EXPECT_NEAR(mean(reconstruct(y, cfg, g).image.data), mean(y.data), 1e-14);
}

TEST(Reconstruct, InputValidation) {
  const Image g = fixtures::random_guide(8, 8, 1, 9);
  const Image wrong(5, 4, 1, 0.5);
  ReconstructionConfig cfg = exact_config(2, KernelKind::tv);
  EXPECT_THROW(reconstruct(wrong, cfg, g), std::invalid_argument);
  cfg.rho_pre = -1.0;
  EXPECT_THROW(reconstruct(Image(4, 4, 1, 0.5), cfg, g), std::invalid_argument);
  cfg.rho_pre = 2.0;
  const ReconstructionResult r = reconstruct(Image(4, 4, 1, 0.5), cfg, g);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Reconstruct, IterationCapReportsNonConvergence) {
  const Image g = fixtures::random_guide(16, 16, 1, 9);
  Image y(4, 4, 1);
  y.data = fixtures::random_signal(16, 1, 0.0, 1.0);
  ReconstructionConfig cfg = exact_config(4, KernelKind::tv);
  cfg.cg.max_iter = 1;
  cfg.cg.rel_tol = 1e-12;
  const ReconstructionResult r = reconstruct(y, cfg, g);
  EXPECT_FALSE(r.all_converged());
  EXPECT_EQ(r.reports[0].iterations_used, 1u);
}
