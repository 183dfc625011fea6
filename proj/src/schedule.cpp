#include "gaplab/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace gaplab {

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas, std::string kind,
                                        double beta_start, double beta_end) {
  if (betas.empty()) throw std::invalid_argument("NoiseSchedule: need at least one step");
  NoiseSchedule s;
  s.kind_ = std::move(kind);
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  const std::size_t n = betas.size() + 1;
  s.beta_.assign(n, 0.0);
  s.alpha_.assign(n, 1.0);
  s.alpha_bar_.assign(n, 1.0);
  s.beta_bar_.assign(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    const double b = betas[t - 1];
    if (!(b > 0.0 && b < 1.0))
      throw std::invalid_argument("NoiseSchedule: beta[" + std::to_string(t) + "] outside (0,1)");
    s.beta_[t] = b;
    s.alpha_[t] = 1.0 - b;
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * s.alpha_[t];
    s.beta_bar_[t] = 1.0 - s.alpha_bar_[t];
  }
  return s;
}

int NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > T())
    throw std::out_of_range("step index " + std::to_string(t) + " outside [1," + std::to_string(T()) + "]");
  return t;
}

int NoiseSchedule::check_index(int t) const {
  if (t < 0 || t > T())
    throw std::out_of_range("step index " + std::to_string(t) + " outside [0," + std::to_string(T()) + "]");
  return t;
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 2) throw std::invalid_argument("linear_schedule: T must be >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  const double step = (beta_end - beta_start) / static_cast<double>(T - 1);
  for (int i = 0; i < T; ++i) betas[static_cast<std::size_t>(i)] = beta_start + i * step;
  return NoiseSchedule::from_betas(std::move(betas), "linear", beta_start, beta_end);
}

NoiseSchedule default_schedule(int T) {
  const double k = 1000.0 / static_cast<double>(T);
  return linear_schedule(T, 1e-4 * k, 0.02 * k);
}

Vec forward_step_with_noise(const NoiseSchedule& s, std::span<const double> x_prev, int t,
                            std::span<const double> z) {
  require_same_dim(x_prev.size(), z.size(), "forward_step");
  const double a = std::sqrt(s.alpha(t));
  const double b = std::sqrt(s.beta(t));
  Vec out(x_prev.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x_prev[i] + b * z[i];
  return out;
}

Vec forward_step(const NoiseSchedule& s, std::span<const double> x_prev, int t, Rng& rng) {
  s.check_step(t);
  const Vec z = standard_normal(rng, x_prev.size());
  return forward_step_with_noise(s, x_prev, t, z);
}

Vec forward_marginal(const NoiseSchedule& s, std::span<const double> x0, int t,
                     std::span<const double> eps) {
  require_same_dim(x0.size(), eps.size(), "forward_marginal");
  const double a = std::sqrt(s.alpha_bar(t));
  const double b = std::sqrt(s.beta_bar(t));
  Vec out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

}  // namespace gaplab
