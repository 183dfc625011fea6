#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gaplab/config.hpp"
#include "gaplab/gap.hpp"
#include "gaplab/persist.hpp"

namespace gaplab {

/// Steps probed by sweep-omega: sweep.t_values if set, else sweep.n_t evenly
/// spaced steps, ascending.
std::vector<int> sweep_steps(const ExperimentConfig& cfg, int T);

/// Least-squares omega*(t) at each of `steps` from `n_probes` marginal draws
/// per step; every other entry (and any degenerate step) is 1. Has T + 1
/// entries, ready for GuidanceSpec::omega_by_t.
std::vector<double> omega_star_schedule(const ScoreField& field, const ScoreField& oracle,
                                        const ConditionedMixtureFamily& f, const NoiseSchedule& s, ConditionLabel c,
                                        std::span<const int> steps, std::size_t n_probes, std::uint64_t seed);

/// Arms of refine-compare: guidance weight 1 or omega*(t), each with and
/// without refinement of the guided noise.
enum class CompareArm { omega_one, omega_star, omega_one_refined, omega_star_refined };
constexpr int kCompareArms = 4;
std::string to_string(CompareArm a);

struct CompareArmResult {
  double accumulated_gap = 0.0;  // mean over the replicate's chains
  double sliced_w1 = 0.0;        // final states against fresh data draws
  std::size_t refine_steps = 0;
  std::size_t refine_improved = 0;  // steps whose final refine loss is below its first
};

struct CompareReplicate {
  std::uint64_t seed = 0;
  CompareArmResult arms[kCompareArms];
  std::vector<double> omega_by_t;
};

struct CompareReport {
  std::vector<CompareReplicate> replicates;
  std::vector<int> steps;

  /// Replicates whose omega*(t) arm has strictly lower accumulated gap than the omega = 1 arm.
  std::size_t omega_star_wins() const;
  /// True when every refined step of every replicate ended below its first loss.
  bool refine_always_improves() const;
};

CompareReport refine_compare(const ExperimentConfig& cfg);

/// Subcommands. Each validates `cfg`, writes manifest.json into `out` before
/// any heavy work, then its artifacts, then the manifest again with the
/// output inventory.
RunManifest cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunManifest cmd_sample(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunManifest cmd_sweep_omega(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunManifest cmd_gap_report(const ExperimentConfig& cfg, const std::filesystem::path& out);
RunManifest cmd_refine_compare(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Dispatch by subcommand name.
RunManifest run_command(const std::string& name, const ExperimentConfig& cfg, const std::filesystem::path& out);
std::vector<std::string> command_names();

}  // namespace gaplab
