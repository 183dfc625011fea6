#pragma once

#include <span>
#include <string>
#include <vector>

#include "gaplab/rng.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

/// Forward-process coefficient tables.
///
/// Step indices are 1-based: t = 1..T. Index 0 is the data itself, with the
/// conventions alpha_bar(0) = 1 and beta_bar(0) = 0. Immutable once built.
class NoiseSchedule {
 public:
  /// Builds the tables from an explicit beta sequence (beta[0] is step 1).
  static NoiseSchedule from_betas(std::vector<double> betas, std::string kind = "custom",
                                  double beta_start = 0.0, double beta_end = 0.0);

  int T() const { return static_cast<int>(beta_.size()) - 1; }

  double beta(int t) const { return beta_.at(check_step(t)); }
  double alpha(int t) const { return alpha_.at(check_step(t)); }
  double alpha_bar(int t) const { return alpha_bar_.at(check_index(t)); }
  double beta_bar(int t) const { return beta_bar_.at(check_index(t)); }

  const std::string& kind() const { return kind_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  int check_step(int t) const;   // throws std::out_of_range unless 1 <= t <= T
  int check_index(int t) const;  // throws std::out_of_range unless 0 <= t <= T

 private:
  NoiseSchedule() = default;

  std::string kind_;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  // All tables have T + 1 entries; entry 0 holds the data-level convention.
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> beta_bar_;
};

/// beta_i = beta_start + (i - 1) (beta_end - beta_start) / (T - 1), i = 1..T.
NoiseSchedule linear_schedule(int T, double beta_start, double beta_end);

/// Conventional endpoints (1e-4, 0.02) rescaled by 1000 / T so that
/// alpha_bar(T) stays near zero for short chains.
NoiseSchedule default_schedule(int T = 1000);

/// One Markov forward step: sqrt(alpha_t) x_prev + sqrt(beta_t) z.
Vec forward_step(const NoiseSchedule& s, std::span<const double> x_prev, int t, Rng& rng);

/// Same step with the Gaussian draw supplied by the caller.
Vec forward_step_with_noise(const NoiseSchedule& s, std::span<const double> x_prev, int t,
                            std::span<const double> z);

/// Closed-form marginal: sqrt(alpha_bar_t) x0 + sqrt(beta_bar_t) eps.
Vec forward_marginal(const NoiseSchedule& s, std::span<const double> x0, int t,
                     std::span<const double> eps);

}  // namespace gaplab
