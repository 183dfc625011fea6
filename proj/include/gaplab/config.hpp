#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/guidance.hpp"
#include "gaplab/mixture.hpp"
#include "gaplab/refine.hpp"
#include "gaplab/sampler.hpp"
#include "gaplab/schedule.hpp"
#include "gaplab/score.hpp"

namespace gaplab {

/// Carries every violated constraint, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Every key a config may set, with its default value.
nlohmann::json default_config();

/// A resolved experiment configuration: defaults, then a config file, then
/// dotted `key=value` overrides, then `--seed`. A run manifest is accepted in
/// place of a config file; its config block is used.
struct ExperimentConfig {
  nlohmann::json doc = default_config();
  /// Rejected keys and values from resolve(); reported by validate()
  /// together with every other problem.
  std::vector<std::string> resolve_errors;

  static ExperimentConfig resolve(const std::optional<std::filesystem::path>& file,
                                  std::span<const std::string> overrides, std::optional<std::uint64_t> seed);

  /// Throws ConfigError listing every problem found.
  void validate() const;

  std::uint64_t seed() const;
  NoiseSchedule schedule() const;
  ConditionedMixtureFamily family() const;
  ConditionLabel label() const;
  GuidanceSpec guidance() const;
  SamplerConfig sampler() const;
  std::optional<RefineConfig> refine() const;
  /// Field named by `field.kind`: oracle, perturbed or mlp.
  ScoreFieldPtr field(const NoiseSchedule& s, const ConditionedMixtureFamily& f) const;

  const nlohmann::json& at(const std::string& dotted) const;
};

/// Applies one `a.b.c=value` override. The value is read as JSON when it
/// parses, otherwise as a string. Unknown keys and type changes are errors.
void apply_override(nlohmann::json& doc, const std::string& assignment);

std::string family_hash(const ConditionedMixtureFamily& f);

}  // namespace gaplab
