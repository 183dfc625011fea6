#include "gaplab/refine.hpp"

#include <cmath>
#include <functional>

namespace gaplab {

std::string to_string(RefineSign v) { return v == RefineSign::descent ? "descent" : "ascent_as_printed"; }
std::string to_string(EpsMode v) { return v == EpsMode::fixed_draw ? "fixed_draw" : "resample_each_iter"; }
std::string to_string(ConvergenceRule v) { return v == ConvergenceRule::grad_norm ? "grad_norm" : "loss_delta"; }
std::string to_string(Termination v) {
  switch (v) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::disabled: return "disabled";
  }
  return "?";
}

void RefineConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("refine.eta must be positive");
  if (!(threshold > 0.0)) throw std::invalid_argument("refine.threshold must be positive");
  if (max_iters < 0) throw std::invalid_argument("refine.max_iters must be >= 0");
}

nlohmann::json RefineConfig::to_json() const {
  return {{"eta", eta},
          {"threshold", threshold},
          {"max_iters", max_iters},
          {"sign", to_string(sign)},
          {"eps_mode", to_string(eps_mode)},
          {"convergence_rule", to_string(rule)}};
}

RefineConfig RefineConfig::from_json(const nlohmann::json& j) {
  RefineConfig c;
  c.eta = j.value("eta", c.eta);
  c.threshold = j.value("threshold", c.threshold);
  c.max_iters = j.value("max_iters", c.max_iters);
  const auto sign = j.value("sign", to_string(c.sign));
  if (sign == "descent") c.sign = RefineSign::descent;
  else if (sign == "ascent_as_printed") c.sign = RefineSign::ascent_as_printed;
  else throw std::invalid_argument("refine.sign: unknown value '" + sign + "'");
  const auto mode = j.value("eps_mode", to_string(c.eps_mode));
  if (mode == "resample_each_iter") c.eps_mode = EpsMode::resample_each_iter;
  else if (mode == "fixed_draw") c.eps_mode = EpsMode::fixed_draw;
  else throw std::invalid_argument("refine.eps_mode: unknown value '" + mode + "'");
  const auto rule = j.value("convergence_rule", to_string(c.rule));
  if (rule == "loss_delta") c.rule = ConvergenceRule::loss_delta;
  else if (rule == "grad_norm") c.rule = ConvergenceRule::grad_norm;
  else throw std::invalid_argument("refine.convergence_rule: unknown value '" + rule + "'");
  return c;
}

double refine_objective(std::span<const double> eps_cfg, std::span<const double> eps_ref) {
  return squared_distance(eps_cfg, eps_ref);
}

Vec refine_gradient(std::span<const double> eps_cfg, std::span<const double> eps_ref) {
  Vec g = subtract(eps_cfg, eps_ref);
  for (double& v : g) v *= 2.0;
  return g;
}

bool converged(const RefineTrace& trace, const RefineConfig& cfg) {
  if (trace.losses.empty()) return false;
  if (cfg.rule == ConvergenceRule::grad_norm) return trace.grad_norms.back() < cfg.threshold;
  if (trace.losses.size() < 2) return false;
  const auto n = trace.losses.size();
  return std::abs(trace.losses[n - 1] - trace.losses[n - 2]) < cfg.threshold;
}

namespace {

RefineResult iterate(std::span<const double> eps_cfg, const RefineConfig& cfg,
                     const std::function<const Vec&(int)>& reference) {
  cfg.validate();
  RefineResult r{Vec(eps_cfg.begin(), eps_cfg.end()), {}};
  if (cfg.max_iters == 0) return r;

  const double step = cfg.sign == RefineSign::descent ? -cfg.eta : cfg.eta;
  const Vec* ref = nullptr;
  for (int k = 0; k < cfg.max_iters; ++k) {
    ref = &reference(k);
    const double loss = refine_objective(r.eps, *ref);
    const Vec grad = refine_gradient(r.eps, *ref);
    r.trace.losses.push_back(loss);
    r.trace.grad_norms.push_back(std::sqrt(squared_norm(grad)));
    for (std::size_t i = 0; i < r.eps.size(); ++i) r.eps[i] += step * grad[i];
    if (!std::isfinite(loss) || !all_finite(r.eps)) {
      r.trace.reason = Termination::max_iters;
      throw RefineDiverged("refinement produced a non-finite value at iteration " + std::to_string(k),
                           std::move(r.trace));
    }
    if (converged(r.trace, cfg)) {
      r.trace.reason = Termination::converged;
      break;
    }
  }
  if (r.trace.reason != Termination::converged) r.trace.reason = Termination::max_iters;
  r.trace.final_loss = refine_objective(r.eps, *ref);
  return r;
}

}  // namespace

RefineResult refine_loop(std::span<const double> eps_cfg, const RefineConfig& cfg, Rng& rng) {
  if (!all_finite(eps_cfg)) throw std::invalid_argument("refine_loop: non-finite input");
  const std::size_t d = eps_cfg.size();
  Vec current;
  bool drawn = false;
  return iterate(eps_cfg, cfg, [&](int) -> const Vec& {
    if (cfg.eps_mode == EpsMode::resample_each_iter || !drawn) {
      current = standard_normal(rng, d);
      drawn = true;
    }
    return current;
  });
}

RefineResult refine_loop_toward(std::span<const double> eps_cfg, std::span<const double> eps_ref,
                                const RefineConfig& cfg) {
  require_same_dim(eps_cfg.size(), eps_ref.size(), "refine_loop_toward");
  if (!all_finite(eps_cfg)) throw std::invalid_argument("refine_loop_toward: non-finite input");
  const Vec ref(eps_ref.begin(), eps_ref.end());
  return iterate(eps_cfg, cfg, [&](int) -> const Vec& { return ref; });
}

}  // namespace gaplab
