#pragma once

// Serial reference implementations of the kernels in kernels.hpp. They are
// kept for testing and benchmarking, never called by the library itself.

#include <cstdint>
#include <span>
#include <vector>

#include "gaplab/guidance.hpp"
#include "gaplab/sampler.hpp"
#include "gaplab/vec.hpp"

namespace gaplab::reference {

ProbeEvaluation evaluate_probes(const Samples& probes, const ScoreField& field, const ScoreField& oracle,
                                ConditionLabel c, int t);
std::vector<double> l_of_omega_curve(const ProbeEvaluation& ev, std::span<const double> omegas);
std::vector<Trajectory> run_chains(const ChainSetup& setup, ConditionLabel c, std::span<const std::uint64_t> seeds);
double rbf_mean(const Samples& A, const Samples& B, double bandwidth);
std::vector<double> kth_neighbor_radii(const Samples& A, int k);
double ball_coverage(const Samples& queries, const Samples& centers, std::span<const double> radii);
std::vector<double> projected_w1(const Samples& A, const Samples& B, const Samples& directions);

/// W1 between two 1-D empirical measures of possibly different sizes.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

}  // namespace gaplab::reference
