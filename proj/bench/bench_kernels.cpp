// Serial reference against the OpenMP kernels on identical inputs.
#include <benchmark/benchmark.h>

#include "gaplab/kernels.hpp"
#include "gaplab/reference.hpp"

using namespace gaplab;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = default_schedule();
  return s;
}

struct ProbeFixture {
  ConditionedMixtureFamily family = preset_family("two-moons-like");
  std::shared_ptr<OracleField> oracle = oracle_field(family, sched());
  ScoreFieldPtr field = perturbed_field(oracle, {PerturbationKind::scaled_gaussian_field, 0.5, 1});
  Samples probes;
  ProbeFixture() {
    Rng rng(1);
    probes = draw_marginal_probes(family, sched(), ConditionLabel::of_class(0), 300, 20000, rng);
  }
};

const ProbeFixture& probes() {
  static const ProbeFixture f;
  return f;
}

Samples cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Samples s(2);
  for (std::size_t i = 0; i < n; ++i) s.push_back(standard_normal(rng, 2));
  return s;
}

template <bool Parallel>
void BM_EvaluateProbes(benchmark::State& st) {
  const auto& f = probes();
  for (auto _ : st) {
    auto ev = Parallel ? kernels::evaluate_probes(f.probes, *f.field, *f.oracle, ConditionLabel::of_class(0), 300)
                       : reference::evaluate_probes(f.probes, *f.field, *f.oracle, ConditionLabel::of_class(0), 300);
    benchmark::DoNotOptimize(ev);
  }
}

template <bool Parallel>
void BM_LOfOmegaCurve(benchmark::State& st) {
  const auto& f = probes();
  const auto ev = reference::evaluate_probes(f.probes, *f.field, *f.oracle, ConditionLabel::of_class(0), 300);
  std::vector<double> omegas;
  for (int k = 0; k <= 800; ++k) omegas.push_back(-2.0 + 0.01 * k);
  for (auto _ : st) {
    auto c = Parallel ? kernels::l_of_omega_curve(ev, omegas) : reference::l_of_omega_curve(ev, omegas);
    benchmark::DoNotOptimize(c);
  }
}

template <bool Parallel>
void BM_RunChains(benchmark::State& st) {
  const auto f = preset_family("bimodal-1d");
  ChainSetup cs;
  cs.schedule = &sched();
  cs.field = oracle_field(f, sched());
  cs.sampler.kind = SamplerKind::ddpm;
  cs.sampler.steps = 100;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 256; ++i) seeds.push_back(derive_seed(1, Stream::chain, static_cast<std::uint64_t>(i)));
  for (auto _ : st) {
    auto out = Parallel ? kernels::run_chains(cs, ConditionLabel::of_class(0), seeds)
                        : reference::run_chains(cs, ConditionLabel::of_class(0), seeds);
    benchmark::DoNotOptimize(out);
  }
}

template <bool Parallel>
void BM_RbfMean(benchmark::State& st) {
  const auto a = cloud(2000, 2), b = cloud(2000, 3);
  for (auto _ : st) benchmark::DoNotOptimize(Parallel ? kernels::rbf_mean(a, b, 1.0) : reference::rbf_mean(a, b, 1.0));
}

template <bool Parallel>
void BM_KthRadii(benchmark::State& st) {
  const auto a = cloud(2000, 4);
  for (auto _ : st) {
    auto r = Parallel ? kernels::kth_neighbor_radii(a, 3) : reference::kth_neighbor_radii(a, 3);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_EvaluateProbes<false>)->Name("evaluate_probes/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateProbes<true>)->Name("evaluate_probes/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LOfOmegaCurve<false>)->Name("l_of_omega_curve/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LOfOmegaCurve<true>)->Name("l_of_omega_curve/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RunChains<false>)->Name("run_chains/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunChains<true>)->Name("run_chains/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RbfMean<false>)->Name("rbf_mean/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RbfMean<true>)->Name("rbf_mean/omp")->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_KthRadii<false>)->Name("kth_neighbor_radii/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KthRadii<true>)->Name("kth_neighbor_radii/omp")->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
