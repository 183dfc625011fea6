#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gaplab/rng.hpp"
#include "gaplab/sampler.hpp"
#include "gaplab/schedule.hpp"
#include "gaplab/score.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

/// ||score - oracle(x, t, c)||^2.
double pointwise_gap(const ScoreField& oracle, std::span<const double> score, std::span<const double> x, int t,
                     ConditionLabel c);

/// Reverse mean obtained by plugging a score into mu_tilde through the x0
/// estimate (x_t + beta_bar_t score) / sqrt(alpha_bar_t).
Vec score_mean(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> score);

/// The affine coefficient of the score in score_mean:
/// (sqrt(ab_{t-1}) - sqrt(bb_{t-1} ab_t / bb_t)) bb_t / sqrt(ab_t).
double mean_coefficient(const NoiseSchedule& s, int t);

/// ||score_mean(guided) - score_mean(oracle)||^2; equals
/// mean_coefficient(t)^2 * ||guided - oracle||^2.
double mean_deviation(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> guided_score,
                      std::span<const double> oracle_score);

struct GapEntry {
  int t = 0;
  double gap = 0.0;             // mean pointwise gap over chains
  std::size_t probe_count = 0;  // chains (or probes) averaged into `gap`
  std::optional<double> l_at_one;
  std::optional<double> l_at_used;
  std::optional<double> omega_used;
  std::optional<double> omega_star;
  std::size_t l_probe_count = 0;
};

struct GapReport {
  std::vector<GapEntry> steps;
  double accumulated_gap = 0.0;
  std::size_t n_chains = 0;
  std::vector<std::uint64_t> seeds;

  /// Recomputes accumulated_gap as the ordered sum of step gaps.
  void finalize();
  std::string to_csv() const;
  nlohmann::json summary() const;
};

/// Pointwise gaps of the recorded eps_used at the states each chain visited,
/// averaged over chains per step and summed over steps. Steps are restricted
/// to indices [first_step, last_step) when given.
GapReport accumulated_gap(std::span<const Trajectory> chains, const ScoreField& oracle, const NoiseSchedule& s,
                          std::size_t first_step = 0, std::size_t last_step = static_cast<std::size_t>(-1));
GapReport accumulated_gap(const Trajectory& traj, const ScoreField& oracle, const NoiseSchedule& s);

/// W1 between 1-D empirical measures via their quantile functions.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

/// Mean W1 over `n_projections` random unit directions.
double sliced_wasserstein(const Samples& A, const Samples& B, int n_projections, Rng& rng);

/// Biased (V-statistic) estimate of the squared MMD with kernel
/// exp(-||x - y||^2 / (2 bandwidth^2)).
double mmd_rbf(const Samples& A, const Samples& B, double bandwidth);

/// Improved precision/recall with k-NN balls. Sets are cut to equal size by
/// strided subsampling of the larger one. Swapping arguments swaps the pair.
std::pair<double, double> knn_precision_recall(const Samples& generated, const Samples& reference, int k = 3);

}  // namespace gaplab
