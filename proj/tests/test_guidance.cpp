#include <gtest/gtest.h>

#include <cmath>

#include "gaplab/guidance.hpp"
#include "gaplab/kernels.hpp"

using namespace gaplab;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
  return s;
}

ProbeEvaluation one_probe(double s_cond, double s_null, double truth) {
  return {5, Samples(1, {s_cond}), Samples(1, {s_null}), Samples(1, {truth})};
}

ProbeEvaluation bimodal_probes(double scale, int t, std::size_t n, std::uint64_t seed) {
  const auto f = preset_family("bimodal-1d");
  const auto o = oracle_field(f, sched());
  const auto field = perturbed_field(o, {PerturbationKind::constant_vector, scale, 11});
  Rng rng(seed);
  const auto probes = draw_marginal_probes(f, sched(), ConditionLabel::of_class(0), t, n, rng);
  return kernels::evaluate_probes(probes, *field, *o, ConditionLabel::of_class(0), t);
}

}  // namespace

TEST(CfgCombine, Examples) {
  const Vec sc{0.3, -1.7}, sn{2.9, 0.1};
  EXPECT_EQ(cfg_combine(sc, sn, 1.0), sc);
  EXPECT_EQ(cfg_combine(sc, sn, 0.0), sn);
  EXPECT_EQ(cfg_combine(Vec{1.0}, Vec{0.0}, 2.0), Vec{2.0});
  EXPECT_THROW(cfg_combine(Vec{1.0}, Vec{1.0, 2.0}, 1.0), std::invalid_argument);
}

TEST(CfgCombine, AffineInOmega) {
  Rng rng(1);
  std::uniform_real_distribution<double> w(-3.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    const Vec sc = standard_normal(rng, 3), sn = standard_normal(rng, 3);
    const double w1 = w(rng), w2 = w(rng);
    const Vec a = cfg_combine(sc, sn, w1), b = cfg_combine(sc, sn, w2);
    const Vec c = cfg_combine(sc, sn, w1 + w2), z = cfg_combine(sc, sn, 0.0);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a[j] + b[j], c[j] + z[j], 1e-12);
  }
}

TEST(CgCombine, Examples) {
  EXPECT_EQ(cg_combine(Vec{1.5, -2.0}, Vec{0.0, 0.0}, 3.0), (Vec{1.5, -2.0}));
  EXPECT_EQ(cg_combine(Vec{1.0}, Vec{0.5}, 1.0), Vec{2.0});
  EXPECT_EQ(cg_combine(Vec{1.0}, Vec{0.5}, 0.0), Vec{1.5});
  EXPECT_THROW(cg_combine(Vec{1.0}, Vec{1.0, 2.0}, 1.0), std::invalid_argument);
}

TEST(CgCombine, BayesDecompositionWithOracles) {
  const auto f = preset_family("two-moons-like");
  const auto o = oracle_field(f, sched());
  const GuidedField cg(o, {GuidanceMode::cg, 0.0}, &f, &sched());
  Rng rng(2);
  std::uniform_int_distribution<int> tt(1, 1000);
  for (int rep = 0; rep < 100; ++rep) {
    const int t = tt(rng);
    const Vec x = scaled(standard_normal(rng, 2), 2.5);
    for (int c = 0; c < 2; ++c) {
      const Vec g = cg.score_at(x, t, ConditionLabel::of_class(c));
      const Vec truth = o->score_at(x, t, ConditionLabel::of_class(c));
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(g[j], truth[j], 1e-8);
    }
  }
}

TEST(GuidedField, OmegaOneIsConditionalAndNullPassesThrough) {
  const auto f = preset_family("bimodal-1d");
  const auto base = perturbed_field(oracle_field(f, sched()), {PerturbationKind::constant_vector, 0.5, 3});
  const GuidedField cfg(base, {GuidanceMode::cfg, 1.0});
  const GuidedField none(base, {GuidanceMode::none, 7.0});
  const GuidedField strong(base, {GuidanceMode::cfg, 3.0});
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vec x = standard_normal(rng, 1);
    const auto c = ConditionLabel::of_class(i % 2);
    EXPECT_EQ(cfg.score_at(x, 400, c), base->score_at(x, 400, c));
    EXPECT_EQ(none.score_at(x, 400, c), base->score_at(x, 400, c));
    EXPECT_EQ(strong.score_at(x, 400, ConditionLabel::null()), base->score_at(x, 400, ConditionLabel::null()));
  }
  EXPECT_THROW(GuidedField(base, {GuidanceMode::cg, 1.0}), std::invalid_argument);
}

TEST(GuidanceSpec, PerStepWeightsAndJson) {
  GuidanceSpec g{GuidanceMode::cfg, 2.0, {}};
  EXPECT_EQ(g.omega_at(17), 2.0);
  g.omega_by_t = {1.0, 1.5, 2.5};
  EXPECT_EQ(g.omega_at(2), 2.5);
  EXPECT_THROW(g.omega_at(3), std::out_of_range);
  const auto back = GuidanceSpec::from_json(g.to_json());
  EXPECT_EQ(back.mode, g.mode);
  EXPECT_EQ(back.omega, g.omega);
  EXPECT_EQ(back.omega_by_t, g.omega_by_t);
  EXPECT_THROW(guidance_mode_from_string("strong"), std::invalid_argument);
  for (auto e : {OmegaEstimator::eq9_mean_of_ratios, OmegaEstimator::least_squares, OmegaEstimator::grid})
    EXPECT_EQ(omega_estimator_from_string(to_string(e)), e);
}

TEST(LOfOmega, ZeroCases) {
  // One class: conditional and null scores coincide, so L is zero for every omega.
  const auto f = preset_family("single-gaussian");
  const auto o = oracle_field(f, sched());
  Rng rng(4);
  const auto probes = draw_marginal_probes(f, sched(), ConditionLabel::of_class(0), 300, 200, rng);
  for (double w : {-1.0, 0.0, 1.0, 4.0})
    EXPECT_LT(l_of_omega(probes, *o, *o, ConditionLabel::of_class(0), 300, w), 1e-24);

  const auto ev = bimodal_probes(0.0, 250, 500, 5);
  EXPECT_LT(l_of_omega(ev, 1.0), 1e-12);
  EXPECT_THROW(l_of_omega(ProbeEvaluation{1, Samples(1), Samples(1), Samples(1)}, 1.0), std::invalid_argument);
}

TEST(LOfOmega, ThreePointQuadraticMatchesLeastSquares) {
  for (int t : {10, 200, 600, 950}) {
    const auto ev = bimodal_probes(0.5, t, 2000, 100 + t);
    const double l0 = l_of_omega(ev, 0.0), l1 = l_of_omega(ev, 1.0), l2 = l_of_omega(ev, 2.0);
    // Quadratic through (0,l0), (1,l1), (2,l2): vertex at 1 - (l2 - l0) / (2 (l2 - 2 l1 + l0)).
    const double vertex = 1.0 - (l2 - l0) / (2.0 * (l2 - 2.0 * l1 + l0));
    EXPECT_NEAR(vertex, omega_star(ev, OmegaEstimator::least_squares).value, 1e-9) << "t=" << t;
  }
}

TEST(OmegaStar, ZeroErrorGivesOne) {
  for (int t : {5, 100, 500, 999}) {
    const auto ev = bimodal_probes(0.0, t, 1000, t);
    for (auto e : {OmegaEstimator::eq9_mean_of_ratios, OmegaEstimator::least_squares, OmegaEstimator::grid})
      EXPECT_NEAR(omega_star(ev, e).value, 1.0, 1e-6) << to_string(e) << " t=" << t;
  }
}

TEST(OmegaStar, SingleProbeAllEstimatorsAgree) {
  const auto ev = one_probe(2.0, 0.0, 3.0);  // delta = 2, e = 1
  for (auto e : {OmegaEstimator::eq9_mean_of_ratios, OmegaEstimator::least_squares, OmegaEstimator::grid})
    EXPECT_NEAR(omega_star(ev, e).value, 1.5, 1e-9) << to_string(e);
  OmegaOptions per_dim;
  per_dim.reading = RatioReading::per_dimension;
  EXPECT_NEAR(omega_star(ev, OmegaEstimator::eq9_mean_of_ratios, per_dim).value, 1.5, 1e-12);
}

TEST(OmegaStar, DegenerateIsAnError) {
  const auto ev = one_probe(1.0, 1.0, 2.0);
  for (auto e : {OmegaEstimator::eq9_mean_of_ratios, OmegaEstimator::least_squares, OmegaEstimator::grid})
    EXPECT_THROW(omega_star(ev, e), DegenerateGuidance);
}

TEST(OmegaStar, EstimatorsDifferWhenDeltaVaries) {
  // Two probes: (delta, e) = (1, 1) and (3, 0).
  const ProbeEvaluation ev{5, Samples(1, {1.0, 3.0}), Samples(1, {0.0, 0.0}), Samples(1, {2.0, 3.0})};
  EXPECT_NEAR(omega_star(ev, OmegaEstimator::least_squares).value, 1.0 + 1.0 / 10.0, 1e-15);
  EXPECT_NEAR(omega_star(ev, OmegaEstimator::eq9_mean_of_ratios).value, 1.0 + 0.5, 1e-15);
}

TEST(OmegaStar, PerDimensionMasksDegenerateCoordinates) {
  // Coordinate 1 has zero delta and is skipped.
  const ProbeEvaluation ev{5, Samples(2, {2.0, 1.0}), Samples(2, {0.0, 1.0}), Samples(2, {3.0, 5.0})};
  OmegaOptions per_dim;
  per_dim.reading = RatioReading::per_dimension;
  EXPECT_NEAR(omega_star(ev, OmegaEstimator::eq9_mean_of_ratios, per_dim).value, 1.5, 1e-15);
}

TEST(OmegaStar, ArgminProperty) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ev = bimodal_probes(0.5 + 0.1 * seed, 50 + 90 * static_cast<int>(seed), 500, seed);
    const double w = omega_star(ev, OmegaEstimator::least_squares).value;
    const double best = l_of_omega(ev, w);
    EXPECT_LE(best, l_of_omega(ev, 1.0) + 1e-12);
    for (double other = -3.0; other <= 7.0; other += 0.25) EXPECT_LE(best, l_of_omega(ev, other) + 1e-12);
  }
}

TEST(OmegaStar, LeastSquaresMatchesGridOnBimodal) {
  OmegaOptions opts;  // [-2, 6] at 1e-3
  for (int t : {1, 50, 200, 400, 600, 800, 1000}) {
    const auto ev = bimodal_probes(0.5, t, 10000, 7 * t);
    const auto ls = omega_star(ev, OmegaEstimator::least_squares, opts);
    const auto grid = omega_star(ev, OmegaEstimator::grid, opts);
    EXPECT_NEAR(ls.value, grid.value, 2e-3) << "t=" << t;
    EXPECT_EQ(grid.grid_resolution.value(), 1e-3);
    EXPECT_FALSE(ls.grid_resolution.has_value());
    EXPECT_EQ(ls.sample_count, 10000u);
    EXPECT_EQ(ls.t, t);
  }
}
