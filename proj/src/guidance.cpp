#include "gaplab/guidance.hpp"

#include <cmath>
#include <stdexcept>

#include "gaplab/kernels.hpp"

namespace gaplab {

std::string to_string(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::none: return "none";
    case GuidanceMode::cfg: return "cfg";
    case GuidanceMode::cg: return "cg";
  }
  return "?";
}

GuidanceMode guidance_mode_from_string(const std::string& s) {
  if (s == "none") return GuidanceMode::none;
  if (s == "cfg") return GuidanceMode::cfg;
  if (s == "cg") return GuidanceMode::cg;
  throw std::invalid_argument("unknown guidance mode '" + s + "' (expected none, cfg or cg)");
}

double GuidanceSpec::omega_at(int t) const {
  if (omega_by_t.empty()) return omega;
  if (t < 0 || static_cast<std::size_t>(t) >= omega_by_t.size())
    throw std::out_of_range("omega_by_t has no entry for t=" + std::to_string(t));
  return omega_by_t[static_cast<std::size_t>(t)];
}

nlohmann::json GuidanceSpec::to_json() const {
  nlohmann::json j{{"mode", to_string(mode)}, {"omega", omega}};
  if (!omega_by_t.empty()) j["omega_by_t"] = omega_by_t;
  return j;
}

GuidanceSpec GuidanceSpec::from_json(const nlohmann::json& j) {
  GuidanceSpec g;
  if (j.contains("mode")) g.mode = guidance_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("omega")) g.omega = j.at("omega").get<double>();
  if (j.contains("omega_by_t")) g.omega_by_t = j.at("omega_by_t").get<std::vector<double>>();
  return g;
}

Vec cfg_combine(std::span<const double> s_cond, std::span<const double> s_null, double omega) {
  require_same_dim(s_cond.size(), s_null.size(), "cfg_combine");
  Vec out(s_cond.size());
  const double rest = 1.0 - omega;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = omega * s_cond[i] + rest * s_null[i];
  return out;
}

Vec cg_combine(std::span<const double> s_null, std::span<const double> classifier_grad, double omega) {
  require_same_dim(s_null.size(), classifier_grad.size(), "cg_combine");
  Vec out(s_null.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s_null[i] + (omega + 1.0) * classifier_grad[i];
  return out;
}

GuidedField::GuidedField(ScoreFieldPtr base, GuidanceSpec spec, const ConditionedMixtureFamily* family,
                         const NoiseSchedule* schedule)
    : base_(std::move(base)), spec_(std::move(spec)), family_(family), schedule_(schedule) {
  if (!base_) throw std::invalid_argument("GuidedField: null base field");
  if (spec_.mode == GuidanceMode::cfg && !base_->has_null_condition())
    throw std::invalid_argument("GuidedField: cfg needs a base field with a null condition");
  if (spec_.mode == GuidanceMode::cg && (!family_ || !schedule_))
    throw std::invalid_argument("GuidedField: cg needs the data family and schedule");
}

Vec GuidedField::score_at(std::span<const double> x, int t, ConditionLabel c) const {
  if (c.is_null() || spec_.mode == GuidanceMode::none) return base_->score_at(x, t, c);
  const double w = spec_.omega_at(t);
  if (spec_.mode == GuidanceMode::cfg)
    return cfg_combine(base_->score_at(x, t, c), base_->score_at(x, t, ConditionLabel::null()), w);
  const ClassPosterior post = classifier(*family_, *schedule_, x, t);
  return cg_combine(base_->score_at(x, t, ConditionLabel::null()),
                    post.log_prob_gradients.at(static_cast<std::size_t>(c.index())), w);
}

nlohmann::json GuidedField::describe() const {
  return {{"kind", "guided"}, {"guidance", spec_.to_json()}, {"base", base_->describe()}};
}

Samples draw_marginal_probes(const ConditionedMixtureFamily& f, const NoiseSchedule& s, ConditionLabel c, int t,
                             std::size_t n, Rng& rng) {
  s.check_step(t);
  const GaussianMixture& data = f.for_label(c);
  Samples out(f.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x0 = sample(data, rng);
    const Vec eps = standard_normal(rng, f.dim());
    out.push_back(forward_marginal(s, x0, t, eps));
  }
  return out;
}

double l_of_omega(const ProbeEvaluation& ev, double omega) {
  if (ev.size() == 0) throw std::invalid_argument("l_of_omega: empty probe set");
  const double rest = 1.0 - omega;
  double total = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto sc = ev.s_cond[i], sn = ev.s_null[i], tr = ev.truth[i];
    double acc = 0.0;
    for (std::size_t k = 0; k < sc.size(); ++k) {
      const double r = omega * sc[k] + rest * sn[k] - tr[k];
      acc += r * r;
    }
    total += acc;
  }
  return total / static_cast<double>(ev.size());
}

double l_of_omega(const Samples& probes, const ScoreField& field, const ScoreField& oracle, ConditionLabel c, int t,
                  double omega) {
  if (probes.empty()) throw std::invalid_argument("l_of_omega: empty probe set");
  return l_of_omega(kernels::evaluate_probes(probes, field, oracle, c, t), omega);
}

std::string to_string(OmegaEstimator e) {
  switch (e) {
    case OmegaEstimator::eq9_mean_of_ratios: return "eq9_mean_of_ratios";
    case OmegaEstimator::least_squares: return "least_squares";
    case OmegaEstimator::grid: return "grid";
  }
  return "?";
}

OmegaEstimator omega_estimator_from_string(const std::string& s) {
  if (s == "eq9_mean_of_ratios") return OmegaEstimator::eq9_mean_of_ratios;
  if (s == "least_squares") return OmegaEstimator::least_squares;
  if (s == "grid") return OmegaEstimator::grid;
  throw std::invalid_argument("unknown omega estimator '" + s + "' (expected eq9_mean_of_ratios, least_squares or grid)");
}

OmegaEstimate omega_star(const ProbeEvaluation& ev, OmegaEstimator estimator, const OmegaOptions& opts) {
  if (ev.size() == 0) throw std::invalid_argument("omega_star: empty probe set");
  const std::size_t n = ev.size();
  const std::size_t d = ev.truth.dim();

  double sum_de = 0.0, sum_dd = 0.0, sum_ratio = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto sc = ev.s_cond[i], sn = ev.s_null[i], tr = ev.truth[i];
    double de = 0.0, dd = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double delta = sc[k] - sn[k];
      const double e = tr[k] - sc[k];
      de += delta * e;
      dd += delta * delta;
      if (opts.reading == RatioReading::per_dimension && delta * delta > kDegeneracyFloor) {
        sum_ratio += e / delta;
        ++used;
      }
    }
    sum_de += de;
    sum_dd += dd;
    if (opts.reading == RatioReading::inner_product && dd > kDegeneracyFloor) {
      sum_ratio += de / dd;
      ++used;
    }
  }
  bool any = false;
  for (std::size_t i = 0; i < n && !any; ++i) any = squared_distance(ev.s_cond[i], ev.s_null[i]) > kDegeneracyFloor;
  if (!any)
    throw DegenerateGuidance("omega_star at t=" + std::to_string(ev.t) +
                             ": conditional and null scores coincide at every probe");

  OmegaEstimate est;
  est.estimator = estimator;
  est.sample_count = n;
  est.t = ev.t;
  switch (estimator) {
    case OmegaEstimator::least_squares:
      est.value = 1.0 + sum_de / sum_dd;
      break;
    case OmegaEstimator::eq9_mean_of_ratios:
      if (used == 0)
        throw DegenerateGuidance("omega_star at t=" + std::to_string(ev.t) + ": every coordinate is degenerate");
      est.value = 1.0 + sum_ratio / static_cast<double>(used);
      break;
    case OmegaEstimator::grid: {
      if (!(opts.grid_resolution > 0.0) || !(opts.grid_max >= opts.grid_min))
        throw std::invalid_argument("omega_star: grid needs resolution > 0 and max >= min");
      const auto count =
          static_cast<std::size_t>(std::llround((opts.grid_max - opts.grid_min) / opts.grid_resolution)) + 1;
      std::vector<double> omegas(count);
      for (std::size_t k = 0; k < count; ++k) omegas[k] = opts.grid_min + static_cast<double>(k) * opts.grid_resolution;
      const auto losses = kernels::l_of_omega_curve(ev, omegas);
      std::size_t best = 0;
      for (std::size_t k = 1; k < count; ++k)
        if (losses[k] < losses[best]) best = k;
      est.value = omegas[best];
      est.grid_resolution = opts.grid_resolution;
      break;
    }
  }
  return est;
}

}  // namespace gaplab
