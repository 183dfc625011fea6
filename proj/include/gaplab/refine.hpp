#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gaplab/rng.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

enum class RefineSign { descent, ascent_as_printed };
enum class EpsMode { resample_each_iter, fixed_draw };
enum class ConvergenceRule { loss_delta, grad_norm };
enum class Termination { converged, max_iters, disabled };

std::string to_string(RefineSign v);
std::string to_string(EpsMode v);
std::string to_string(ConvergenceRule v);
std::string to_string(Termination v);

/// Per-step refinement of the guided noise prediction. Defaults: step scale
/// 5e-2, threshold 1e-3, at most 50 iterations.
///
/// `descent` moves against the gradient of ||eps_cfg - eps||^2;
/// `ascent_as_printed` adds it, which diverges on this convex objective and is
/// kept only to demonstrate that.
struct RefineConfig {
  double eta = 5e-2;
  double threshold = 1e-3;
  int max_iters = 50;
  RefineSign sign = RefineSign::descent;
  EpsMode eps_mode = EpsMode::resample_each_iter;
  ConvergenceRule rule = ConvergenceRule::loss_delta;

  void validate() const;
  nlohmann::json to_json() const;
  static RefineConfig from_json(const nlohmann::json& j);
};

struct RefineTrace {
  std::vector<double> losses;      // L_k, evaluated before update k
  std::vector<double> grad_norms;  // ||grad L_k||
  Termination reason = Termination::disabled;
  double final_loss = 0.0;         // loss of the returned prediction against the last reference draw

  int iterations() const { return static_cast<int>(losses.size()); }
};

class RefineDiverged : public std::runtime_error {
 public:
  RefineDiverged(const std::string& what, RefineTrace trace) : std::runtime_error(what), trace_(std::move(trace)) {}
  const RefineTrace& trace() const { return trace_; }

 private:
  RefineTrace trace_;
};

/// ||eps_cfg - eps_ref||^2.
double refine_objective(std::span<const double> eps_cfg, std::span<const double> eps_ref);

/// Gradient of refine_objective with respect to eps_cfg: 2 (eps_cfg - eps_ref).
Vec refine_gradient(std::span<const double> eps_cfg, std::span<const double> eps_ref);

/// loss_delta: |L_k - L_{k-1}| < threshold (needs two entries);
/// grad_norm: ||grad L_k|| < threshold.
bool converged(const RefineTrace& trace, const RefineConfig& cfg);

struct RefineResult {
  Vec eps;
  RefineTrace trace;
};

/// Iterates eps <- eps -/+ eta grad L with eps_ref ~ N(0, I), drawn once
/// (fixed_draw) or every iteration (resample_each_iter), until converged() or
/// max_iters. max_iters = 0 returns the input unchanged and draws nothing.
RefineResult refine_loop(std::span<const double> eps_cfg, const RefineConfig& cfg, Rng& rng);

/// Same iteration against a caller-supplied, fixed reference.
RefineResult refine_loop_toward(std::span<const double> eps_cfg, std::span<const double> eps_ref,
                                const RefineConfig& cfg);

}  // namespace gaplab
