#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/rng.hpp"
#include "gaplab/schedule.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

/// Either a class index or the null condition.
class ConditionLabel {
 public:
  static ConditionLabel null() { return ConditionLabel(-1); }
  static ConditionLabel of_class(int c);

  bool is_null() const { return index_ < 0; }
  int index() const;  // throws std::logic_error for the null label
  std::string str() const { return is_null() ? "null" : std::to_string(index_); }
  static ConditionLabel parse(const std::string& text);

  bool operator==(const ConditionLabel&) const = default;

 private:
  explicit ConditionLabel(int i) : index_(i) {}
  int index_;
};

/// Diagonal-covariance Gaussian mixture.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Vec> means, std::vector<Vec> variances);

  std::size_t dim() const { return means_.front().size(); }
  std::size_t components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vec>& means() const { return means_; }
  const std::vector<Vec>& variances() const { return variances_; }

 private:
  std::vector<double> weights_;
  std::vector<Vec> means_;
  std::vector<Vec> variances_;
};

/// log sum_k w_k N(x; mu_k, diag(var_k)), evaluated with log-sum-exp.
double log_density(const GaussianMixture& m, std::span<const double> x);

/// Exact gradient of log_density: sum_k r_k(x) (mu_k - x) / var_k.
Vec score(const GaussianMixture& m, std::span<const double> x);

/// Mixture of the step-t marginal: means scaled by sqrt(alpha_bar), variances
/// alpha_bar * var + beta_bar. Weights unchanged.
GaussianMixture diffused(const GaussianMixture& m, const NoiseSchedule& s, int t);

Vec sample(const GaussianMixture& m, Rng& rng);

/// Per-class data mixtures with class priors; the unconditional mixture is the
/// prior-weighted union of the class components.
class ConditionedMixtureFamily {
 public:
  ConditionedMixtureFamily(std::vector<double> class_priors, std::vector<GaussianMixture> per_class,
                           std::string name = "custom");

  std::size_t dim() const { return per_class_.front().dim(); }
  int num_classes() const { return static_cast<int>(per_class_.size()); }
  const std::vector<double>& priors() const { return priors_; }
  const std::vector<GaussianMixture>& classes() const { return per_class_; }
  const GaussianMixture& unconditional() const { return unconditional_; }
  const GaussianMixture& for_label(ConditionLabel c) const;
  const std::string& name() const { return name_; }

  nlohmann::json to_json() const;
  static ConditionedMixtureFamily from_json(const nlohmann::json& j, std::string name = "custom");

 private:
  std::string name_;
  std::vector<double> priors_;
  std::vector<GaussianMixture> per_class_;
  GaussianMixture unconditional_;
};

struct ClassPosterior {
  std::vector<double> probabilities;  // q(c | x_t)
  std::vector<Vec> log_prob_gradients;  // grad_x log q(c | x_t), one per class
};

/// Exact Bayes classifier on the diffused class mixtures.
ClassPosterior classifier(const ConditionedMixtureFamily& f, const NoiseSchedule& s,
                          std::span<const double> x, int t);

/// Built-in fixtures: "bimodal-1d", "two-moons-like", "single-gaussian".
ConditionedMixtureFamily preset_family(const std::string& name);
std::vector<std::string> preset_names();

ConditionedMixtureFamily load_family(const std::filesystem::path& path);

}  // namespace gaplab
