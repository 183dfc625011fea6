#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/mixture.hpp"
#include "gaplab/score.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

enum class GuidanceMode { none, cfg, cg };

std::string to_string(GuidanceMode m);
GuidanceMode guidance_mode_from_string(const std::string& s);

/// Guidance mode and weight. `omega_by_t`, when non-empty, overrides `omega`
/// per step (index t, so it has T + 1 entries).
struct GuidanceSpec {
  GuidanceMode mode = GuidanceMode::none;
  double omega = 1.0;
  std::vector<double> omega_by_t;

  double omega_at(int t) const;
  nlohmann::json to_json() const;
  static GuidanceSpec from_json(const nlohmann::json& j);
};

/// omega * s_cond + (1 - omega) * s_null. Returns s_cond exactly at omega = 1
/// and s_null exactly at omega = 0.
Vec cfg_combine(std::span<const double> s_cond, std::span<const double> s_null, double omega);

/// s_null + (omega + 1) * classifier_grad.
Vec cg_combine(std::span<const double> s_null, std::span<const double> classifier_grad, double omega);

/// Applies a GuidanceSpec on top of a base field. Classifier guidance draws
/// its gradient from the exact Bayes classifier of `family`.
class GuidedField final : public ScoreField {
 public:
  GuidedField(ScoreFieldPtr base, GuidanceSpec spec, const ConditionedMixtureFamily* family = nullptr,
              const NoiseSchedule* schedule = nullptr);

  std::size_t dim() const override { return base_->dim(); }
  Vec score_at(std::span<const double> x, int t, ConditionLabel c) const override;
  bool has_null_condition() const override { return base_->has_null_condition(); }
  nlohmann::json describe() const override;

  const GuidanceSpec& spec() const { return spec_; }

 private:
  ScoreFieldPtr base_;
  GuidanceSpec spec_;
  const ConditionedMixtureFamily* family_;
  const NoiseSchedule* schedule_;
};

/// Conditional, null and true conditional scores at a fixed probe set.
struct ProbeEvaluation {
  int t = 0;
  Samples s_cond;
  Samples s_null;
  Samples truth;

  std::size_t size() const { return truth.size(); }
};

/// Draws n points from the step-t marginal q(x_t | c).
Samples draw_marginal_probes(const ConditionedMixtureFamily& f, const NoiseSchedule& s, ConditionLabel c, int t,
                             std::size_t n, Rng& rng);

/// Mean over probes of ||cfg(omega) - truth||^2.
double l_of_omega(const ProbeEvaluation& ev, double omega);
double l_of_omega(const Samples& probes, const ScoreField& field, const ScoreField& oracle, ConditionLabel c, int t,
                  double omega);

enum class OmegaEstimator { eq9_mean_of_ratios, least_squares, grid };
enum class RatioReading { inner_product, per_dimension };

std::string to_string(OmegaEstimator e);
OmegaEstimator omega_estimator_from_string(const std::string& s);

constexpr double kDegeneracyFloor = 1e-10;

struct OmegaOptions {
  RatioReading reading = RatioReading::inner_product;
  double grid_min = -2.0;
  double grid_max = 6.0;
  double grid_resolution = 1e-3;
};

struct OmegaEstimate {
  double value = 1.0;
  OmegaEstimator estimator = OmegaEstimator::least_squares;
  std::size_t sample_count = 0;
  int t = 0;
  std::optional<double> grid_resolution;
};

class DegenerateGuidance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Estimates the guidance weight minimising L(omega) at one step.
///
/// least_squares: 1 + sum<D, e> / sum<D, D>, the exact argmin of l_of_omega.
/// eq9_mean_of_ratios: 1 + mean of <D, e> / <D, D> over non-degenerate probes
///   (or of D_i e_i / D_i^2 over non-degenerate coordinates, per_dimension).
/// grid: argmin of l_of_omega over [grid_min, grid_max] at grid_resolution.
/// Here D = s_cond - s_null and e = truth - s_cond. Throws DegenerateGuidance
/// when no probe has ||D||^2 above kDegeneracyFloor.
OmegaEstimate omega_star(const ProbeEvaluation& ev, OmegaEstimator estimator, const OmegaOptions& opts = {});

}  // namespace gaplab
