#include "gaplab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>

#include <omp.h>

#include "gaplab/gap.hpp"

namespace gaplab::kernels {

namespace {

// Collects the first exception thrown inside a parallel region.
class ErrorSlot {
 public:
  template <class F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!err_) err_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (err_) std::rethrow_exception(err_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr err_;
};

std::int64_t as_index(std::size_t n) { return static_cast<std::int64_t>(n); }

}  // namespace

int thread_count() { return omp_get_max_threads(); }

ProbeEvaluation evaluate_probes(const Samples& probes, const ScoreField& field, const ScoreField& oracle,
                                ConditionLabel c, int t) {
  const std::size_t n = probes.size();
  const std::size_t d = field.dim();
  require_same_dim(probes.dim(), d, "evaluate_probes");
  std::vector<double> cond(n * d), null(n * d), truth(n * d);
  ErrorSlot errors;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < as_index(n); ++i) {
    errors.run([&] {
      const auto x = probes[static_cast<std::size_t>(i)];
      const Vec sc = field.score_at(x, t, c);
      const Vec sn = field.score_at(x, t, ConditionLabel::null());
      const Vec tr = oracle.score_at(x, t, c);
      std::copy(sc.begin(), sc.end(), cond.begin() + i * as_index(d));
      std::copy(sn.begin(), sn.end(), null.begin() + i * as_index(d));
      std::copy(tr.begin(), tr.end(), truth.begin() + i * as_index(d));
    });
  }
  errors.rethrow();
  return {t, Samples(d, std::move(cond)), Samples(d, std::move(null)), Samples(d, std::move(truth))};
}

std::vector<double> l_of_omega_curve(const ProbeEvaluation& ev, std::span<const double> omegas) {
  std::vector<double> out(omegas.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < as_index(omegas.size()); ++k)
    out[static_cast<std::size_t>(k)] = l_of_omega(ev, omegas[static_cast<std::size_t>(k)]);
  return out;
}

std::vector<Trajectory> run_chains(const ChainSetup& setup, ConditionLabel c, std::span<const std::uint64_t> seeds) {
  setup.validate();
  std::vector<Trajectory> out(seeds.size());
  ErrorSlot errors;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < as_index(seeds.size()); ++i) {
    errors.run([&] { out[static_cast<std::size_t>(i)] = sample_chain(setup, c, seeds[static_cast<std::size_t>(i)]); });
  }
  errors.rethrow();
  return out;
}

double rbf_mean(const Samples& A, const Samples& B, double bandwidth) {
  require_same_dim(A.dim(), B.dim(), "rbf_mean");
  if (A.empty() || B.empty()) throw std::invalid_argument("rbf_mean: empty sample set");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const std::size_t d = A.dim(), nb = B.size();
  std::vector<double> rows(A.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < as_index(A.size()); ++i) {
    const double* a = A.data().data() + static_cast<std::size_t>(i) * d;
    const double* b = B.data().data();
    double acc = 0.0;
    for (std::size_t j = 0; j < nb; ++j, b += d) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        d2 += diff * diff;
      }
      acc += std::exp(-d2 * inv);
    }
    rows[static_cast<std::size_t>(i)] = acc;
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total / (static_cast<double>(A.size()) * static_cast<double>(B.size()));
}

std::vector<double> kth_neighbor_radii(const Samples& A, int k) {
  if (k < 1 || static_cast<std::size_t>(k) >= A.size())
    throw std::invalid_argument("kth_neighbor_radii: need 1 <= k < set size");
  std::vector<double> radii(A.size());
#pragma omp parallel
  {
    std::vector<double> dist(A.size() - 1);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < as_index(A.size()); ++i) {
      const auto a = A[static_cast<std::size_t>(i)];
      std::size_t m = 0;
      for (std::size_t j = 0; j < A.size(); ++j)
        if (j != static_cast<std::size_t>(i)) dist[m++] = squared_distance(a, A[j]);
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      radii[static_cast<std::size_t>(i)] = std::sqrt(dist[static_cast<std::size_t>(k - 1)]);
    }
  }
  return radii;
}

double ball_coverage(const Samples& queries, const Samples& centers, std::span<const double> radii) {
  require_same_dim(queries.dim(), centers.dim(), "ball_coverage");
  require_same_dim(centers.size(), radii.size(), "ball_coverage radii");
  if (queries.empty()) throw std::invalid_argument("ball_coverage: no queries");
  std::vector<unsigned char> hit(queries.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < as_index(queries.size()); ++i) {
    const auto q = queries[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < centers.size(); ++j) {
      if (std::sqrt(squared_distance(q, centers[j])) <= radii[j]) {
        hit[static_cast<std::size_t>(i)] = 1;
        break;
      }
    }
  }
  std::size_t count = 0;
  for (auto h : hit) count += h;
  return static_cast<double>(count) / static_cast<double>(queries.size());
}

std::vector<double> projected_w1(const Samples& A, const Samples& B, const Samples& directions) {
  require_same_dim(A.dim(), B.dim(), "projected_w1");
  require_same_dim(A.dim(), directions.dim(), "projected_w1 directions");
  std::vector<double> out(directions.size());
  ErrorSlot errors;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < as_index(directions.size()); ++p) {
    errors.run([&] {
      const auto dir = directions[static_cast<std::size_t>(p)];
      std::vector<double> a(A.size()), b(B.size());
      for (std::size_t i = 0; i < A.size(); ++i) a[i] = dot(A[i], dir);
      for (std::size_t i = 0; i < B.size(); ++i) b[i] = dot(B[i], dir);
      out[static_cast<std::size_t>(p)] = wasserstein1_1d(std::move(a), std::move(b));
    });
  }
  errors.rethrow();
  return out;
}

}  // namespace gaplab::kernels
