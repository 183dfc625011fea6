#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/mixture.hpp"
#include "gaplab/schedule.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

/// A score estimator s(x_t, t, c). Implementations are immutable and safe to
/// evaluate from several threads at once.
class ScoreField {
 public:
  virtual ~ScoreField() = default;

  virtual std::size_t dim() const = 0;
  virtual Vec score_at(std::span<const double> x, int t, ConditionLabel c) const = 0;
  virtual bool has_null_condition() const = 0;
  virtual nlohmann::json describe() const = 0;
};

using ScoreFieldPtr = std::shared_ptr<const ScoreField>;

/// score = -eps / sqrt(beta_bar_t). Rejects t with beta_bar_t = 0.
Vec score_from_eps(std::span<const double> eps, const NoiseSchedule& s, int t);
Vec eps_from_score(std::span<const double> score, const NoiseSchedule& s, int t);

/// Exact scores of the diffused class (or unconditional) mixtures.
class OracleField final : public ScoreField {
 public:
  OracleField(ConditionedMixtureFamily family, NoiseSchedule schedule);

  std::size_t dim() const override { return family_.dim(); }
  Vec score_at(std::span<const double> x, int t, ConditionLabel c) const override;
  bool has_null_condition() const override { return true; }
  nlohmann::json describe() const override;

  const GaussianMixture& diffused_mixture(int t, ConditionLabel c) const;
  const ConditionedMixtureFamily& family() const { return family_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  ConditionedMixtureFamily family_;
  NoiseSchedule schedule_;
  // tables_[t][label], label K is the null condition.
  std::vector<std::vector<GaussianMixture>> tables_;
};

enum class PerturbationKind { constant_vector, scaled_gaussian_field, scaled_score_direction };

std::string to_string(PerturbationKind k);
PerturbationKind perturbation_kind_from_string(const std::string& s);

/// Controlled score error e(x, t, c), added to a base field.
///
/// constant_vector: scale * v, with v a unit vector fixed per (t, c, seed), or
/// the normalised `direction` when one is given.
/// scaled_gaussian_field: scale * z, z ~ N(0, I) seeded by (x, t, c, seed).
/// scaled_score_direction: -scale * base(x, t, c), a damped score.
///
/// By default only class-conditional outputs are perturbed; the null output is
/// left exact unless `include_null` is set.
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::constant_vector;
  double scale = 0.0;
  std::uint64_t seed = 0;
  bool include_null = false;
  Vec direction;

  nlohmann::json to_json() const;
  static PerturbationSpec from_json(const nlohmann::json& j);
};

class PerturbedField final : public ScoreField {
 public:
  PerturbedField(ScoreFieldPtr base, PerturbationSpec spec);

  std::size_t dim() const override { return base_->dim(); }
  Vec score_at(std::span<const double> x, int t, ConditionLabel c) const override;
  bool has_null_condition() const override { return base_->has_null_condition(); }
  nlohmann::json describe() const override;

  /// The injected error alone.
  Vec error_at(std::span<const double> x, int t, ConditionLabel c) const;
  const PerturbationSpec& spec() const { return spec_; }

 private:
  ScoreFieldPtr base_;
  PerturbationSpec spec_;
};

std::shared_ptr<OracleField> oracle_field(const ConditionedMixtureFamily& f, const NoiseSchedule& s);
ScoreFieldPtr perturbed_field(ScoreFieldPtr base, const PerturbationSpec& p);

}  // namespace gaplab
