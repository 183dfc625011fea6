#include "gaplab/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gaplab::reference {

ProbeEvaluation evaluate_probes(const Samples& probes, const ScoreField& field, const ScoreField& oracle,
                                ConditionLabel c, int t) {
  const std::size_t d = field.dim();
  ProbeEvaluation ev{t, Samples(d), Samples(d), Samples(d)};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    ev.s_cond.push_back(field.score_at(probes[i], t, c));
    ev.s_null.push_back(field.score_at(probes[i], t, ConditionLabel::null()));
    ev.truth.push_back(oracle.score_at(probes[i], t, c));
  }
  return ev;
}

std::vector<double> l_of_omega_curve(const ProbeEvaluation& ev, std::span<const double> omegas) {
  std::vector<double> out;
  out.reserve(omegas.size());
  for (double w : omegas) out.push_back(l_of_omega(ev, w));
  return out;
}

std::vector<Trajectory> run_chains(const ChainSetup& setup, ConditionLabel c, std::span<const std::uint64_t> seeds) {
  std::vector<Trajectory> out;
  out.reserve(seeds.size());
  for (auto s : seeds) out.push_back(sample_chain(setup, c, s));
  return out;
}

double rbf_mean(const Samples& A, const Samples& B, double bandwidth) {
  if (A.empty() || B.empty()) throw std::invalid_argument("rbf_mean: empty sample set");
  double total = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < B.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < A.dim(); ++k) {
        const double diff = A[i][k] - B[j][k];
        d2 += diff * diff;
      }
      row += std::exp(-d2 * (1.0 / (2.0 * bandwidth * bandwidth)));
    }
    total += row;
  }
  return total / (static_cast<double>(A.size()) * static_cast<double>(B.size()));
}

std::vector<double> kth_neighbor_radii(const Samples& A, int k) {
  if (k < 1 || static_cast<std::size_t>(k) >= A.size())
    throw std::invalid_argument("kth_neighbor_radii: need 1 <= k < set size");
  std::vector<double> radii;
  radii.reserve(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    std::vector<double> dist;
    for (std::size_t j = 0; j < A.size(); ++j)
      if (j != i) dist.push_back(std::sqrt(squared_distance(A[i], A[j])));
    std::sort(dist.begin(), dist.end());
    radii.push_back(dist[static_cast<std::size_t>(k - 1)]);
  }
  return radii;
}

double ball_coverage(const Samples& queries, const Samples& centers, std::span<const double> radii) {
  if (queries.empty()) throw std::invalid_argument("ball_coverage: no queries");
  std::size_t count = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    bool inside = false;
    for (std::size_t j = 0; j < centers.size() && !inside; ++j)
      inside = std::sqrt(squared_distance(queries[i], centers[j])) <= radii[j];
    count += inside ? 1 : 0;
  }
  return static_cast<double>(count) / static_cast<double>(queries.size());
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1_1d: empty input");
  // Integral of |F_a(x) - F_b(x)| over the merged support.
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> support(a);
  support.insert(support.end(), b.begin(), b.end());
  std::sort(support.begin(), support.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < support.size(); ++i) {
    const double x = support[i];
    const double width = support[i + 1] - x;
    if (width == 0.0) continue;
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    total += std::abs(fa - fb) * width;
  }
  return total;
}

std::vector<double> projected_w1(const Samples& A, const Samples& B, const Samples& directions) {
  std::vector<double> out;
  for (std::size_t p = 0; p < directions.size(); ++p) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < A.size(); ++i) a.push_back(dot(A[i], directions[p]));
    for (std::size_t i = 0; i < B.size(); ++i) b.push_back(dot(B[i], directions[p]));
    out.push_back(wasserstein1_1d(std::move(a), std::move(b)));
  }
  return out;
}

}  // namespace gaplab::reference
