#include <gtest/gtest.h>

#include <cmath>

#include "gaplab/refine.hpp"
#include "oracles.hpp"

using namespace gaplab;

namespace {

RefineConfig fixed(double eta = 0.05) {
  RefineConfig c;
  c.eta = eta;
  c.eps_mode = EpsMode::fixed_draw;
  return c;
}

}  // namespace

TEST(RefineObjective, Examples) {
  EXPECT_EQ(refine_objective(Vec{0.3, -0.2}, Vec{0.3, -0.2}), 0.0);
  EXPECT_EQ(refine_objective(Vec{3.0, 4.0}, Vec{0.0, 0.0}), 25.0);
  EXPECT_THROW(refine_objective(Vec{1.0}, Vec{1.0, 2.0}), std::invalid_argument);
}

TEST(RefineObjective, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec ref = standard_normal(rng, 4), x = standard_normal(rng, 4);
    const auto fd = oracle::fd_gradient([&](const std::vector<double>& y) { return refine_objective(y, ref); }, x);
    const Vec g = refine_gradient(x, ref);
    // The objective is quadratic, so central differences are exact up to rounding.
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(g[j], fd[j], 1e-8);
  }
}

TEST(Converged, Rules) {
  RefineConfig c;
  RefineTrace tr;
  EXPECT_FALSE(converged(tr, c));
  tr.losses = {1.0};
  tr.grad_norms = {2.0};
  EXPECT_FALSE(converged(tr, c));
  tr.losses = {1.0, 1.0, 1.0};
  tr.grad_norms = {2.0, 2.0, 2.0};
  EXPECT_TRUE(converged(tr, c));
  c.rule = ConvergenceRule::grad_norm;
  EXPECT_FALSE(converged(tr, c));
  tr.grad_norms.back() = 5e-4;
  EXPECT_TRUE(converged(tr, c));
}

TEST(Converged, GeometricSequenceStopsAtK26) {
  // Independent oracle: first k with |0.81^k - 0.81^(k-1)| < 1e-3.
  const int k_oracle = oracle::geometric_termination_index(1.0, 0.81, 1e-3);
  EXPECT_EQ(k_oracle, 26);
  RefineConfig c;
  RefineTrace tr;
  int hit = -1;
  for (int k = 0; k < 100 && hit < 0; ++k) {
    tr.losses.push_back(std::pow(0.81, k));
    tr.grad_norms.push_back(1.0);
    if (converged(tr, c)) hit = k;
  }
  EXPECT_EQ(hit, 26);
}

TEST(RefineLoop, FixedDrawContractsBy081) {
  Rng rng(2);
  const auto r = refine_loop(Vec{1.3, -0.4, 2.2}, fixed(), rng);
  ASSERT_GE(r.trace.losses.size(), 3u);
  for (std::size_t k = 1; k < r.trace.losses.size(); ++k)
    EXPECT_NEAR(r.trace.losses[k] / r.trace.losses[k - 1], 0.81, 1e-9);
  EXPECT_EQ(r.trace.reason, Termination::converged);
}

TEST(RefineLoop, UnitLossTerminatesAtK26) {
  // eps_cfg - eps_ref is a unit vector, so L_0 = 1.
  const Vec ref{0.2, -0.7};
  const Vec cfg{0.2 + 0.6, -0.7 + 0.8};
  const auto r = refine_loop_toward(cfg, ref, fixed());
  EXPECT_NEAR(r.trace.losses.front(), 1.0, 1e-14);
  EXPECT_EQ(r.trace.iterations(), 27);  // entries L_0 ... L_26
  EXPECT_EQ(r.trace.reason, Termination::converged);
  EXPECT_NEAR(r.trace.final_loss, std::pow(0.81, 27), 1e-12);
}

TEST(RefineLoop, FixedPointStopsImmediately) {
  const Vec ref{0.5, 0.5};
  auto c = fixed();
  c.rule = ConvergenceRule::grad_norm;
  const auto r = refine_loop_toward(ref, ref, c);
  EXPECT_EQ(r.trace.iterations(), 1);
  EXPECT_EQ(r.eps, ref);
  EXPECT_EQ(r.trace.grad_norms.front(), 0.0);
  // With loss_delta the first delta is only available after one more entry.
  const auto r2 = refine_loop_toward(ref, ref, fixed());
  EXPECT_EQ(r2.eps, ref);
  EXPECT_EQ(r2.trace.iterations(), 2);
}

TEST(RefineLoop, ZeroItersIsIdentity) {
  RefineConfig c;
  c.max_iters = 0;
  Rng rng(3), untouched(3);
  const Vec in{0.1, 0.2};
  const auto r = refine_loop(in, c, rng);
  EXPECT_EQ(r.eps, in);
  EXPECT_TRUE(r.trace.losses.empty());
  EXPECT_EQ(r.trace.reason, Termination::disabled);
  EXPECT_EQ(rng(), untouched());
}

TEST(RefineLoop, AscentAsPrintedDiverges) {
  auto c = fixed();
  c.sign = RefineSign::ascent_as_printed;
  c.max_iters = 6;
  const auto r = refine_loop_toward(Vec{1.0}, Vec{0.0}, c);
  ASSERT_EQ(r.trace.iterations(), 6);
  EXPECT_GT(r.trace.losses[5], r.trace.losses[0]);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_NEAR(r.trace.losses[k] / r.trace.losses[k - 1], 1.21, 1e-9);
  EXPECT_EQ(r.trace.reason, Termination::max_iters);
}

TEST(RefineLoop, AscentEventuallyAbortsWithTrace) {
  auto c = fixed(0.5e3);
  c.sign = RefineSign::ascent_as_printed;
  c.max_iters = 1000;
  try {
    refine_loop_toward(Vec{1.0}, Vec{0.0}, c);
    FAIL() << "expected RefineDiverged";
  } catch (const RefineDiverged& e) {
    EXPECT_FALSE(e.trace().losses.empty());
  }
}

TEST(RefineLoop, StrictlyDecreasingUnderDescent) {
  Rng rng(4);
  for (double eta : {0.01, 0.1, 0.3, 0.49}) {
    auto c = fixed(eta);
    c.threshold = 1e-12;
    c.max_iters = 40;
    const auto r = refine_loop(standard_normal(rng, 3), c, rng);
    for (std::size_t k = 1; k < r.trace.losses.size(); ++k) EXPECT_LT(r.trace.losses[k], r.trace.losses[k - 1]);
  }
}

TEST(RefineLoop, SmallEtaIsNearIdentity) {
  RefineConfig c;
  c.eta = 1e-9;
  Rng rng(5);
  const Vec in{0.7, -1.1, 0.05};
  const auto r = refine_loop(in, c, rng);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.eps[j], in[j], 1e-6);
}

TEST(RefineLoop, BitReproducible) {
  for (auto mode : {EpsMode::resample_each_iter, EpsMode::fixed_draw}) {
    RefineConfig c;
    c.eps_mode = mode;
    Rng a(6), b(6);
    const auto ra = refine_loop(Vec{1.0, 2.0}, c, a), rb = refine_loop(Vec{1.0, 2.0}, c, b);
    EXPECT_EQ(ra.eps, rb.eps);
    EXPECT_EQ(ra.trace.losses, rb.trace.losses);
  }
}

TEST(RefineLoop, ResampledReferenceHitsCap) {
  // A fresh reference each iteration keeps the loss near d, so loss_delta
  // rarely fires and the cap ends the loop.
  RefineConfig c;
  Rng rng(7);
  int capped = 0;
  for (int i = 0; i < 20; ++i) {
    const auto r = refine_loop(Vec(8, 0.0), c, rng);
    EXPECT_LE(r.trace.iterations(), 50);
    capped += r.trace.reason == Termination::max_iters;
  }
  EXPECT_GT(capped, 0);
}

TEST(RefineLoop, RejectsBadInput) {
  Rng rng(8);
  EXPECT_THROW(refine_loop(Vec{std::nan("")}, RefineConfig{}, rng), std::invalid_argument);
  RefineConfig bad;
  bad.eta = 0.0;
  EXPECT_THROW(refine_loop(Vec{1.0}, bad, rng), std::invalid_argument);
}

TEST(RefineConfig, JsonRoundtrip) {
  RefineConfig c;
  c.eta = 0.2;
  c.sign = RefineSign::ascent_as_printed;
  c.eps_mode = EpsMode::fixed_draw;
  c.rule = ConvergenceRule::grad_norm;
  c.max_iters = 7;
  const auto back = RefineConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(RefineConfig::from_json({{"sign", "sideways"}}), std::invalid_argument);
  // Defaults carry the printed constants.
  const RefineConfig d;
  EXPECT_EQ(d.eta, 5e-2);
  EXPECT_EQ(d.threshold, 1e-3);
  EXPECT_EQ(d.max_iters, 50);
}
