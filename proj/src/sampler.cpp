#include "gaplab/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace gaplab {

namespace {

// Shared mean path: sqrt(ab_prev) x0 + sqrt(bb_prev - sigma2) (x_t - sqrt(ab_t) x0) / sqrt(bb_t).
Vec posterior_combine(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t,
                      std::span<const double> x0, double sigma2) {
  require_same_dim(x_t.size(), x0.size(), "posterior_combine");
  s.check_step(t);
  if (t_prev < 0 || t_prev >= t) throw std::out_of_range("previous step must lie in [0, t)");
  const double sa = std::sqrt(s.alpha_bar(t));
  const double sb = std::sqrt(s.beta_bar(t));
  const double sa_prev = std::sqrt(s.alpha_bar(t_prev));
  const double dir_coef = std::sqrt(std::max(s.beta_bar(t_prev) - sigma2, 0.0));
  Vec out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sa_prev * x0[i] + dir_coef * (x_t[i] - sa * x0[i]) / sb;
  return out;
}

enum StreamTag : std::uint64_t { kInit = 101, kCorrector = 102, kRefine = 103 };

}  // namespace

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::ddpm: return "ddpm";
    case SamplerKind::ddim: return "ddim";
    case SamplerKind::pc_langevin: return "pc_langevin";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "ddpm") return SamplerKind::ddpm;
  if (s == "ddim") return SamplerKind::ddim;
  if (s == "pc_langevin") return SamplerKind::pc_langevin;
  throw std::invalid_argument("unknown sampler kind '" + s + "'");
}

void SamplerConfig::validate(int T) const {
  const int n = resolved_steps(T);
  if (n < 1 || n > T) throw std::invalid_argument("sampler.steps must lie in [1, T]");
  if (corrector_iters < 0) throw std::invalid_argument("sampler.corrector_iters must be >= 0");
  if (kind == SamplerKind::pc_langevin && corrector_iters < 1)
    throw std::invalid_argument("pc_langevin requires corrector_iters >= 1");
  if (kind == SamplerKind::pc_langevin && !(snr_target > 0.0))
    throw std::invalid_argument("pc_langevin requires snr_target > 0");
  if (!(langevin_max_step > 0.0)) throw std::invalid_argument("sampler.langevin_max_step must be positive");
}

nlohmann::json SamplerConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"steps", steps},
          {"corrector_iters", corrector_iters},
          {"snr_target", snr_target},
          {"langevin_max_step", langevin_max_step}};
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  c.kind = sampler_kind_from_string(j.value("kind", to_string(c.kind)));
  c.steps = j.value("steps", c.steps);
  c.corrector_iters = j.value("corrector_iters", c.corrector_iters);
  c.snr_target = j.value("snr_target", c.snr_target);
  c.langevin_max_step = j.value("langevin_max_step", c.langevin_max_step);
  return c;
}

std::vector<int> timestep_sequence(int T, int steps) {
  if (steps < 1 || steps > T) throw std::invalid_argument("timestep_sequence: steps must lie in [1, T]");
  std::vector<int> taus;
  if (steps == 1) return {T};
  taus.reserve(static_cast<std::size_t>(steps));
  for (int i = steps - 1; i >= 0; --i) {
    const double pos = 1.0 + static_cast<double>(i) * (T - 1) / (steps - 1);
    taus.push_back(static_cast<int>(std::lround(pos)));
  }
  return taus;
}

Vec predict_x0(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> eps) {
  require_same_dim(x_t.size(), eps.size(), "predict_x0");
  const double sa = std::sqrt(s.alpha_bar(t));
  const double sb = std::sqrt(s.beta_bar(t));
  Vec out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - sb * eps[i]) / sa;
  return out;
}

Vec mu_tilde(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> x0_hat) {
  return mu_tilde(s, t, t - 1, x_t, x0_hat);
}

Vec mu_tilde(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t,
             std::span<const double> x0_hat) {
  return posterior_combine(s, t, t_prev, x_t, x0_hat, 0.0);
}

Vec ddim_step(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> eps_pred) {
  return ddim_step(s, t, t - 1, x_t, eps_pred);
}

Vec ddim_step(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t,
              std::span<const double> eps_pred) {
  return mu_tilde(s, t, t_prev, x_t, predict_x0(s, t, x_t, eps_pred));
}

double ddpm_sigma2(const NoiseSchedule& s, int t, int t_prev) {
  if (t_prev == 0) return 0.0;
  return s.beta_bar(t_prev) / s.beta_bar(t) * (1.0 - s.alpha_bar(t) / s.alpha_bar(t_prev));
}

Vec ddpm_step_with_noise(const NoiseSchedule& s, int t, int t_prev, std::span<const double> x_t,
                         std::span<const double> eps_pred, std::span<const double> z) {
  const double sigma2 = ddpm_sigma2(s, t, t_prev);
  Vec out = posterior_combine(s, t, t_prev, x_t, predict_x0(s, t, x_t, eps_pred), sigma2);
  if (sigma2 > 0.0 && !z.empty()) {
    require_same_dim(z.size(), out.size(), "ddpm noise");
    const double sigma = std::sqrt(sigma2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * z[i];
  }
  return out;
}

Vec ddpm_step(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> eps_pred, Rng& rng) {
  if (t == 1) return ddpm_step_with_noise(s, t, 0, x_t, eps_pred, {});
  const Vec z = standard_normal(rng, x_t.size());
  return ddpm_step_with_noise(s, t, t - 1, x_t, eps_pred, z);
}

Vec langevin_correct(const ScoreField& field, std::span<const double> x, int t, ConditionLabel c, double snr_target,
                     int iters, Rng& rng, double max_step) {
  if (iters < 1) throw std::invalid_argument("langevin_correct: iters must be >= 1");
  if (!(snr_target >= 0.0)) throw std::invalid_argument("langevin_correct: snr_target must be >= 0");
  Vec cur(x.begin(), x.end());
  for (int k = 0; k < iters; ++k) {
    const Vec g = field.score_at(cur, t, c);
    const Vec z = standard_normal(rng, cur.size());
    const double gn = std::sqrt(squared_norm(g));
    double delta = 0.0;
    if (snr_target > 0.0) {
      delta = max_step;
      if (gn > 0.0) {
        const double r = snr_target * std::sqrt(squared_norm(z)) / gn;
        delta = std::min(2.0 * r * r, max_step);
      }
    }
    const double noise = std::sqrt(2.0 * delta);
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += delta * g[i] + noise * z[i];
  }
  return cur;
}

void ChainSetup::validate() const {
  if (!schedule) throw std::invalid_argument("chain setup: missing schedule");
  if (!field) throw std::invalid_argument("chain setup: missing score field");
  sampler.validate(schedule->T());
  if (guidance.mode == GuidanceMode::cfg && !field->has_null_condition())
    throw std::invalid_argument("classifier-free guidance needs a field with null-condition support");
  if (guidance.mode == GuidanceMode::cg && !family)
    throw std::invalid_argument("classifier guidance needs the data family for its classifier");
  if (!guidance.omega_by_t.empty() && guidance.omega_by_t.size() != static_cast<std::size_t>(schedule->T()) + 1)
    throw std::invalid_argument("guidance.omega_by_t must have T + 1 entries");
  if (refine) refine->validate();
  if (oracle) require_same_dim(oracle->dim(), field->dim(), "oracle field");
}

Trajectory sample_chain(const ChainSetup& setup, ConditionLabel c, std::uint64_t seed) {
  setup.validate();
  const NoiseSchedule& s = *setup.schedule;
  const std::size_t d = setup.field->dim();
  const auto taus = timestep_sequence(s.T(), setup.sampler.resolved_steps(s.T()));
  const bool stochastic = setup.sampler.kind != SamplerKind::ddim;

  Rng chain_rng(derive_seed(seed, kInit));
  Rng corrector_rng(derive_seed(seed, kCorrector));
  Rng refine_rng(derive_seed(seed, kRefine));

  GuidedField guided(setup.field, setup.guidance, setup.family, setup.schedule);

  Trajectory traj;
  traj.seed = seed;
  traj.c = c;
  traj.guidance = setup.guidance;
  traj.states.reserve(taus.size() + 1);
  traj.steps.reserve(taus.size());
  traj.states.push_back(standard_normal(chain_rng, d));

  for (std::size_t i = 0; i < taus.size(); ++i) {
    const int t = taus[i];
    const int t_prev = i + 1 < taus.size() ? taus[i + 1] : 0;
    try {
      StepRecord rec;
      rec.t = t;
      rec.t_prev = t_prev;
      rec.omega = setup.guidance.omega_at(t);
      rec.x_input = traj.states.back();
      if (setup.sampler.kind == SamplerKind::pc_langevin)
        rec.x_input = langevin_correct(guided, rec.x_input, t, c, setup.sampler.snr_target,
                                       setup.sampler.corrector_iters, corrector_rng, setup.sampler.langevin_max_step);

      rec.eps_guided = eps_from_score(guided.score_at(rec.x_input, t, c), s, t);
      rec.eps_used = rec.eps_guided;
      if (setup.refine) {
        RefineResult r = refine_loop(rec.eps_guided, *setup.refine, refine_rng);
        rec.eps_used = std::move(r.eps);
        rec.refine_trace = static_cast<int>(traj.refine_traces.size());
        traj.refine_traces.push_back(std::move(r.trace));
      }
      if (setup.oracle)
        rec.gap = squared_distance(score_from_eps(rec.eps_used, s, t), setup.oracle->score_at(rec.x_input, t, c));

      Vec next;
      if (stochastic) {
        if (t_prev > 0) rec.noise = standard_normal(chain_rng, d);
        next = ddpm_step_with_noise(s, t, t_prev, rec.x_input, rec.eps_used, rec.noise);
      } else {
        next = ddim_step(s, t, t_prev, rec.x_input, rec.eps_used);
      }
      if (!all_finite(next)) throw SamplerError("non-finite state");
      traj.states.push_back(std::move(next));
      traj.steps.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw SamplerError("chain seed " + std::to_string(seed) + ", step t=" + std::to_string(t) + ": " + e.what());
    }
  }
  return traj;
}

std::vector<Vec> replay(const Trajectory& traj, const NoiseSchedule& s, SamplerKind kind) {
  std::vector<Vec> out;
  out.reserve(traj.steps.size());
  for (const auto& rec : traj.steps) {
    if (kind == SamplerKind::ddim)
      out.push_back(ddim_step(s, rec.t, rec.t_prev, rec.x_input, rec.eps_used));
    else
      out.push_back(ddpm_step_with_noise(s, rec.t, rec.t_prev, rec.x_input, rec.eps_used, rec.noise));
  }
  return out;
}

}  // namespace gaplab
