#include "gaplab/gap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gaplab/kernels.hpp"

namespace gaplab {

double pointwise_gap(const ScoreField& oracle, std::span<const double> score, std::span<const double> x, int t,
                     ConditionLabel c) {
  return squared_distance(score, oracle.score_at(x, t, c));
}

Vec score_mean(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> score) {
  require_same_dim(x_t.size(), score.size(), "score_mean");
  const double bb = s.beta_bar(t);
  const double sa = std::sqrt(s.alpha_bar(t));
  Vec x0(x_t.size());
  for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = (x_t[i] + bb * score[i]) / sa;
  return mu_tilde(s, t, x_t, x0);
}

double mean_coefficient(const NoiseSchedule& s, int t) {
  s.check_step(t);
  const double ab = s.alpha_bar(t), bb = s.beta_bar(t);
  const double ab_prev = s.alpha_bar(t - 1), bb_prev = s.beta_bar(t - 1);
  return (std::sqrt(ab_prev) - std::sqrt(bb_prev * ab / bb)) * bb / std::sqrt(ab);
}

double mean_deviation(const NoiseSchedule& s, int t, std::span<const double> x_t, std::span<const double> guided_score,
                      std::span<const double> oracle_score) {
  return squared_distance(score_mean(s, t, x_t, guided_score), score_mean(s, t, x_t, oracle_score));
}

void GapReport::finalize() {
  accumulated_gap = 0.0;
  for (const auto& e : steps) accumulated_gap += e.gap;
}

namespace {

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

std::string GapReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t,gap,L1,Lw,omega_star\n";
  for (const auto& e : steps)
    os << e.t << ',' << e.gap << ',' << fmt_opt(e.l_at_one) << ',' << fmt_opt(e.l_at_used) << ','
       << fmt_opt(e.omega_star) << '\n';
  return os.str();
}

nlohmann::json GapReport::summary() const {
  return {{"accumulated_gap", accumulated_gap}, {"n_chains", n_chains}, {"seeds", seeds}};
}

GapReport accumulated_gap(std::span<const Trajectory> chains, const ScoreField& oracle, const NoiseSchedule& s,
                          std::size_t first_step, std::size_t last_step) {
  if (chains.empty()) throw std::invalid_argument("accumulated_gap: no trajectories");
  const std::size_t n_steps = chains.front().steps.size();
  for (const auto& tr : chains)
    if (tr.steps.size() != n_steps) throw std::invalid_argument("accumulated_gap: trajectories differ in length");
  last_step = std::min(last_step, n_steps);

  GapReport rep;
  rep.n_chains = chains.size();
  for (const auto& tr : chains) rep.seeds.push_back(tr.seed);
  for (std::size_t k = first_step; k < last_step; ++k) {
    GapEntry e;
    e.t = chains.front().steps[k].t;
    double sum = 0.0;
    for (const auto& tr : chains) {
      const StepRecord& rec = tr.steps[k];
      if (rec.eps_used.empty() || rec.x_input.empty())
        throw std::invalid_argument("accumulated_gap: step t=" + std::to_string(rec.t) + " lacks recorded eps");
      sum += pointwise_gap(oracle, score_from_eps(rec.eps_used, s, rec.t), rec.x_input, rec.t, tr.c);
    }
    e.gap = sum / static_cast<double>(chains.size());
    e.probe_count = chains.size();
    e.omega_used = chains.front().steps[k].omega;
    rep.steps.push_back(e);
  }
  rep.finalize();
  return rep;
}

GapReport accumulated_gap(const Trajectory& traj, const ScoreField& oracle, const NoiseSchedule& s) {
  return accumulated_gap(std::span<const Trajectory>(&traj, 1), oracle, s);
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1_1d: empty input");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Walk both quantile functions; positions are in units of 1 / (n m).
  const std::uint64_t n = a.size(), m = b.size();
  std::uint64_t i = 0, j = 0, cur = 0;
  double total = 0.0;
  while (i < n && j < m) {
    const std::uint64_t ai = (i + 1) * m, bj = (j + 1) * n;
    const std::uint64_t nxt = std::min(ai, bj);
    total += static_cast<double>(nxt - cur) * std::abs(a[i] - b[j]);
    cur = nxt;
    if (ai == nxt) ++i;
    if (bj == nxt) ++j;
  }
  return total / (static_cast<double>(n) * static_cast<double>(m));
}

double sliced_wasserstein(const Samples& A, const Samples& B, int n_projections, Rng& rng) {
  if (A.empty() || B.empty()) throw std::invalid_argument("sliced_wasserstein: empty sample set");
  require_same_dim(A.dim(), B.dim(), "sliced_wasserstein");
  if (n_projections < 1) throw std::invalid_argument("sliced_wasserstein: need at least one projection");
  Samples dirs(A.dim());
  for (int p = 0; p < n_projections; ++p) {
    Vec v;
    do {
      v = standard_normal(rng, A.dim());
    } while (squared_norm(v) == 0.0);
    const double norm = std::sqrt(squared_norm(v));
    for (double& x : v) x /= norm;
    dirs.push_back(v);
  }
  const auto w = kernels::projected_w1(A, B, dirs);
  double total = 0.0;
  for (double x : w) total += x;
  return total / static_cast<double>(w.size());
}

double mmd_rbf(const Samples& A, const Samples& B, double bandwidth) {
  if (A.empty() || B.empty()) throw std::invalid_argument("mmd_rbf: empty sample set");
  require_same_dim(A.dim(), B.dim(), "mmd_rbf");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_rbf: bandwidth must be positive");
  return kernels::rbf_mean(A, A, bandwidth) + kernels::rbf_mean(B, B, bandwidth) -
         2.0 * kernels::rbf_mean(A, B, bandwidth);
}

namespace {

Samples strided_subset(const Samples& s, std::size_t n) {
  if (s.size() == n) return s;
  Samples out(s.dim());
  for (std::size_t i = 0; i < n; ++i) out.push_back(s[i * s.size() / n]);
  return out;
}

}  // namespace

std::pair<double, double> knn_precision_recall(const Samples& generated, const Samples& reference, int k) {
  if (generated.empty() || reference.empty()) throw std::invalid_argument("knn_precision_recall: empty sample set");
  require_same_dim(generated.dim(), reference.dim(), "knn_precision_recall");
  const std::size_t n = std::min(generated.size(), reference.size());
  if (k < 1 || static_cast<std::size_t>(k) >= n)
    throw std::invalid_argument("knn_precision_recall: need 1 <= k < set size");
  const Samples gen = strided_subset(generated, n);
  const Samples ref = strided_subset(reference, n);
  const auto ref_radii = kernels::kth_neighbor_radii(ref, k);
  const auto gen_radii = kernels::kth_neighbor_radii(gen, k);
  return {kernels::ball_coverage(gen, ref, ref_radii), kernels::ball_coverage(ref, gen, gen_radii)};
}

}  // namespace gaplab
