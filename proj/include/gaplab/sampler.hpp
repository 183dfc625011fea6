#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/guidance.hpp"
#include "gaplab/refine.hpp"
#include "gaplab/rng.hpp"
#include "gaplab/schedule.hpp"
#include "gaplab/score.hpp"

namespace gaplab {

enum class SamplerKind { ddpm, ddim, pc_langevin };

std::string to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string& s);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::ddim;
  int steps = 0;  // 0 means every step of the schedule
  int corrector_iters = 1;
  double snr_target = 0.16;
  double langevin_max_step = 1e-2;  // upper bound on the corrector step

  void validate(int T) const;
  int resolved_steps(int T) const { return steps == 0 ? T : steps; }
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

/// Descending timesteps T = tau_{n-1} > ... > tau_0 = 1, evenly spaced; a
/// single step uses {T}.
std::vector<int> timestep_sequence(int T, int steps);

/// x0 prediction from a noise prediction: (x_t - sqrt(beta_bar_t) eps) / sqrt(alpha_bar_t).
Vec predict_x0(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> eps);

/// sqrt(ab_prev) x0 + sqrt(bb_prev) (x_t - sqrt(ab_t) x0) / sqrt(bb_t), with
/// prev = t - 1 unless given.
Vec mu_tilde(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> x0_hat);
Vec mu_tilde(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t, std::span<const double> x0_hat);

/// Deterministic DDIM (eta = 0) update: mu_tilde with the predicted x0.
Vec ddim_step(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> eps_pred);
Vec ddim_step(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t,
              std::span<const double> eps_pred);

/// Posterior variance (bb_prev / bb_t)(1 - ab_t / ab_prev); equals
/// (bb_{t-1} / bb_t) beta_t for consecutive steps.
double ddpm_sigma2(const NoiseSchedule& s, int t, int t_prev);

/// Ancestral step: sqrt(ab_prev) x0 + sqrt(bb_prev - sigma^2) eps + sigma z.
/// sigma = 0 reduces to ddim_step; at t_prev = 0, sigma is 0.
Vec ddpm_step(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> eps_pred, Rng& rng);
Vec ddpm_step_with_noise(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t,
                         std::span<const double> eps_pred, std::span<const double> z);

/// `iters` Langevin sweeps at fixed t: x <- x + delta s + sqrt(2 delta) z,
/// delta = min(2 (snr ||z|| / ||s||)^2, max_step); max_step when ||s|| = 0.
Vec langevin_correct(const ScoreField& field, std::span<const double> x, int t, ConditionLabel c, double snr_target,
                     int iters, Rng& rng, double max_step = 1e-2);

struct StepRecord {
  int t = 0;
  int t_prev = 0;
  double omega = 1.0;
  Vec x_input;   // state consumed by the predictor (after any corrector sweeps)
  Vec eps_guided;
  Vec eps_used;  // after refinement
  Vec noise;     // ancestral noise; empty for deterministic steps
  std::optional<int> refine_trace;
  std::optional<double> gap;  // ||score(eps_used) - oracle||^2 when an oracle was supplied
};

struct Trajectory {
  std::uint64_t seed = 0;
  ConditionLabel c = ConditionLabel::null();
  GuidanceSpec guidance;
  std::vector<Vec> states;  // x_T ... x_0
  std::vector<StepRecord> steps;
  std::vector<RefineTrace> refine_traces;

  const Vec& final_state() const { return states.back(); }
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a chain needs besides its seed and label. Pointers are
/// non-owning and must outlive the call.
struct ChainSetup {
  const NoiseSchedule* schedule = nullptr;
  ScoreFieldPtr field;
  GuidanceSpec guidance;
  SamplerConfig sampler;
  std::optional<RefineConfig> refine;
  const ScoreField* oracle = nullptr;
  const ConditionedMixtureFamily* family = nullptr;  // required for classifier guidance

  void validate() const;
};

/// One reverse chain from x_T ~ N(0, I). Initial state and ancestral noise,
/// corrector noise and refinement draws come from separate streams derived
/// from `seed`, so toggling refinement does not shift the sampler's noise.
Trajectory sample_chain(const ChainSetup& setup, ConditionLabel c, std::uint64_t seed);

/// Re-applies each recorded step to its recorded inputs.
std::vector<Vec> replay(const Trajectory& traj, const NoiseSchedule& s, SamplerKind kind);

}  // namespace gaplab
