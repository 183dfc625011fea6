#pragma once

// OpenMP kernels for the data-parallel loops of the lab: probe evaluation,
// L(omega) curves, chain batches and the O(n^2) sample-quality sums.
//
// Every kernel writes per-item results into a preallocated buffer and reduces
// them serially in index order, so outputs are bit-identical to the serial
// versions in reference.hpp regardless of thread count.

#include <cstdint>
#include <span>
#include <vector>

#include "gaplab/guidance.hpp"
#include "gaplab/sampler.hpp"
#include "gaplab/vec.hpp"

namespace gaplab::kernels {

/// Evaluates field(x, c), field(x, null) and oracle(x, c) at every probe.
ProbeEvaluation evaluate_probes(const Samples& probes, const ScoreField& field, const ScoreField& oracle,
                                ConditionLabel c, int t);

/// l_of_omega at each omega.
std::vector<double> l_of_omega_curve(const ProbeEvaluation& ev, std::span<const double> omegas);

/// One chain per seed.
std::vector<Trajectory> run_chains(const ChainSetup& setup, ConditionLabel c, std::span<const std::uint64_t> seeds);

/// Mean of exp(-||a - b||^2 / (2 h^2)) over all pairs (a in A, b in B).
double rbf_mean(const Samples& A, const Samples& B, double bandwidth);

/// Distance from each point to its k-th nearest neighbour in the same set,
/// excluding itself.
std::vector<double> kth_neighbor_radii(const Samples& A, int k);

/// Fraction of `queries` lying inside at least one ball (centers[j], radii[j]).
double ball_coverage(const Samples& queries, const Samples& centers, std::span<const double> radii);

/// 1-D Wasserstein-1 distance between the projections of A and B on each
/// direction (rows of `directions`).
std::vector<double> projected_w1(const Samples& A, const Samples& B, const Samples& directions);

/// Number of threads the kernels would use.
int thread_count();

}  // namespace gaplab::kernels
