#include "gaplab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gaplab/kernels.hpp"
#include "gaplab/mlp.hpp"
#include "gaplab/svg.hpp"

namespace gaplab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Everything derived from the config that most commands share.
struct Setup {
  NoiseSchedule schedule;
  ConditionedMixtureFamily family;
  std::shared_ptr<OracleField> oracle;
  ScoreFieldPtr field;
  ConditionLabel label;

  explicit Setup(const ExperimentConfig& cfg, bool with_field = true)
      : schedule(cfg.schedule()),
        family(cfg.family()),
        oracle(oracle_field(family, schedule)),
        field(with_field ? cfg.field(schedule, family) : nullptr),
        label(cfg.label()) {}
};

RunManifest begin_run(const ExperimentConfig& cfg, const fs::path& out, const std::string& command) {
  cfg.validate();
  fs::create_directories(out);
  RunManifest m;
  m.tool_version = tool_version();
  m.created_utc = utc_timestamp();
  m.command = command;
  m.config = cfg.doc;
  m.config["family_sha256"] = family_hash(cfg.family());
  m.master_seed = cfg.seed();
  save_manifest(m, out / "manifest.json");
  return m;
}

void emit(RunManifest& m, const fs::path& out, const std::string& file, const std::string& text) {
  write_text_file(out / file, text);
  record_output(m, out, file);
}

void finish_run(const RunManifest& m, const fs::path& out) { save_manifest(m, out / "manifest.json"); }

Samples reference_draws(const ConditionedMixtureFamily& f, ConditionLabel c, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const GaussianMixture& data = f.for_label(c);
  Samples out(f.dim());
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample(data, rng));
  return out;
}

Samples final_states(const std::vector<Trajectory>& chains, std::size_t dim) {
  Samples out(dim);
  for (const auto& tr : chains) out.push_back(tr.final_state());
  return out;
}

std::vector<std::uint64_t> chain_seeds(std::uint64_t master, std::size_t n) {
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = derive_seed(master, Stream::chain, i);
  return seeds;
}

ProbeEvaluation probe_step(const Setup& st, int t, std::size_t n, std::uint64_t master) {
  Rng rng(derive_seed(master, Stream::probes, static_cast<std::uint64_t>(t)));
  const Samples probes = draw_marginal_probes(st.family, st.schedule, st.label, t, n, rng);
  return kernels::evaluate_probes(probes, *st.field, *st.oracle, st.label, t);
}

svg::Series samples_series(const std::string& label, const Samples& s, bool scatter) {
  svg::Series out{label, {}, {}};
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.x.push_back(s[i][0]);
    if (scatter) out.y.push_back(s[i][1]);
  }
  return out;
}

}  // namespace

std::vector<int> sweep_steps(const ExperimentConfig& cfg, int T) {
  std::vector<int> steps = cfg.at("sweep.t_values").get<std::vector<int>>();
  if (steps.empty()) steps = timestep_sequence(T, std::min(T, cfg.at("sweep.n_t").get<int>()));
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

std::vector<double> omega_star_schedule(const ScoreField& field, const ScoreField& oracle,
                                        const ConditionedMixtureFamily& f, const NoiseSchedule& s, ConditionLabel c,
                                        std::span<const int> steps, std::size_t n_probes, std::uint64_t seed) {
  std::vector<double> omega(static_cast<std::size_t>(s.T()) + 1, 1.0);
  for (int t : steps) {
    Rng rng(derive_seed(seed, Stream::probes, static_cast<std::uint64_t>(t)));
    const Samples probes = draw_marginal_probes(f, s, c, t, n_probes, rng);
    const ProbeEvaluation ev = kernels::evaluate_probes(probes, field, oracle, c, t);
    try {
      omega[static_cast<std::size_t>(t)] = omega_star(ev, OmegaEstimator::least_squares).value;
    } catch (const DegenerateGuidance&) {
      omega[static_cast<std::size_t>(t)] = 1.0;
    }
  }
  return omega;
}

std::string to_string(CompareArm a) {
  switch (a) {
    case CompareArm::omega_one: return "omega_one";
    case CompareArm::omega_star: return "omega_star";
    case CompareArm::omega_one_refined: return "omega_one_refined";
    case CompareArm::omega_star_refined: return "omega_star_refined";
  }
  return "?";
}

std::size_t CompareReport::omega_star_wins() const {
  std::size_t wins = 0;
  for (const auto& r : replicates)
    if (r.arms[static_cast<int>(CompareArm::omega_star)].accumulated_gap <
        r.arms[static_cast<int>(CompareArm::omega_one)].accumulated_gap)
      ++wins;
  return wins;
}

bool CompareReport::refine_always_improves() const {
  for (const auto& r : replicates)
    for (const auto& a : r.arms)
      if (a.refine_improved != a.refine_steps) return false;
  return true;
}

CompareReport refine_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  const Setup st(cfg);
  if (!st.field->has_null_condition()) throw std::invalid_argument("refine-compare needs a field with a null condition");
  const SamplerConfig sampler = cfg.sampler();
  const std::optional<RefineConfig> refine = cfg.refine();
  const int T = st.schedule.T();
  const auto n_seeds = cfg.at("compare.n_seeds").get<std::size_t>();
  const auto per_seed = cfg.at("compare.chains_per_seed").get<std::size_t>();
  const auto n_probes = cfg.at("compare.n_probes").get<std::size_t>();
  const auto n_ref = cfg.at("metrics.reference_points").get<std::size_t>();
  const int projections = cfg.at("metrics.projections").get<int>();

  CompareReport report;
  report.steps = timestep_sequence(T, sampler.resolved_steps(T));
  for (std::size_t k = 0; k < n_seeds; ++k) {
    CompareReplicate rep;
    rep.seed = derive_seed(cfg.seed(), Stream::replicate, k);
    rep.omega_by_t =
        omega_star_schedule(*st.field, *st.oracle, st.family, st.schedule, st.label, report.steps, n_probes, rep.seed);
    const auto seeds = chain_seeds(rep.seed, per_seed);
    const Samples ref = reference_draws(st.family, st.label, n_ref, derive_seed(rep.seed, Stream::reference_data));

    for (int a = 0; a < kCompareArms; ++a) {
      const auto arm = static_cast<CompareArm>(a);
      const bool weighted = arm == CompareArm::omega_star || arm == CompareArm::omega_star_refined;
      const bool refined = arm == CompareArm::omega_one_refined || arm == CompareArm::omega_star_refined;
      ChainSetup setup;
      setup.schedule = &st.schedule;
      setup.field = st.field;
      setup.guidance.mode = GuidanceMode::cfg;
      if (weighted) setup.guidance.omega_by_t = rep.omega_by_t;
      setup.sampler = sampler;
      if (refined) setup.refine = refine;
      setup.oracle = st.oracle.get();
      setup.family = &st.family;

      const auto chains = kernels::run_chains(setup, st.label, seeds);
      CompareArmResult& res = rep.arms[a];
      res.accumulated_gap = accumulated_gap(chains, *st.oracle, st.schedule).accumulated_gap;
      Rng proj(derive_seed(rep.seed, Stream::metrics));
      res.sliced_w1 = sliced_wasserstein(final_states(chains, st.family.dim()), ref, projections, proj);
      for (const auto& tr : chains)
        for (const auto& rt : tr.refine_traces) {
          if (rt.losses.empty()) continue;
          ++res.refine_steps;
          if (rt.final_loss < rt.losses.front()) ++res.refine_improved;
        }
    }
    report.replicates.push_back(std::move(rep));
  }
  return report;
}

RunManifest cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  RunManifest m = begin_run(cfg, out, "train");
  const Setup st(cfg, false);
  const auto& tc = cfg.at("train");
  const std::uint64_t master = cfg.seed();

  Rng data_rng(derive_seed(master, Stream::training, 0));
  std::discrete_distribution<int> pick_class(st.family.priors().begin(), st.family.priors().end());
  std::vector<LabelledPoint> data;
  const auto n_data = tc.at("data_points").get<std::size_t>();
  for (std::size_t i = 0; i < n_data; ++i) {
    const auto c = ConditionLabel::of_class(pick_class(data_rng));
    data.push_back({sample(st.family.for_label(c), data_rng), c});
  }

  MlpScoreModel model = make_mlp(st.family.dim(), st.family.num_classes(), tc.at("hidden").get<std::vector<std::size_t>>(),
                                 derive_seed(master, Stream::init));
  model.p_uncond = tc.at("p_uncond").get<double>();
  TrainState state(std::move(model), tc.at("momentum").get<double>());

  Rng rng(derive_seed(master, Stream::training, 1));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  const auto steps = tc.at("steps").get<int>();
  const auto batch_size = tc.at("batch_size").get<std::size_t>();
  const auto log_every = tc.at("log_every").get<int>();
  const double lr = tc.at("learning_rate").get<double>();

  std::ostringstream csv;
  csv << "step,loss\n";
  svg::Series curve{"batch loss", {}, {}};
  std::vector<LabelledPoint> batch;
  batch.reserve(batch_size);
  for (int step = 1; step <= steps; ++step) {
    batch.clear();
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(data[pick(rng)]);
    const double loss = mlp_train_step(state, batch, st.schedule, rng, lr);
    if (step % log_every == 0 || step == 1 || step == steps) {
      csv << step << ',' << fmt(loss) << '\n';
      curve.x.push_back(step);
      curve.y.push_back(loss);
    }
  }

  const std::string ckpt = tc.at("checkpoint").get<std::string>();
  save_checkpoint(state.model, out / ckpt);
  record_output(m, out, ckpt);
  emit(m, out, "train_loss.csv", csv.str());
  emit(m, out, "train_loss.svg",
       svg::line_plot({"Training loss", "step", "eps-prediction loss", true}, {curve}));
  finish_run(m, out);
  return m;
}

RunManifest cmd_sample(const ExperimentConfig& cfg, const fs::path& out) {
  RunManifest m = begin_run(cfg, out, "sample");
  const Setup st(cfg);
  const std::uint64_t master = cfg.seed();
  const std::size_t d = st.family.dim();

  ChainSetup setup;
  setup.schedule = &st.schedule;
  setup.field = st.field;
  setup.guidance = cfg.guidance();
  setup.sampler = cfg.sampler();
  setup.refine = cfg.refine();
  setup.oracle = st.oracle.get();
  setup.family = &st.family;
  const auto seeds = chain_seeds(master, cfg.at("chains.count").get<std::size_t>());
  const auto chains = kernels::run_chains(setup, st.label, seeds);

  std::ostringstream samples;
  samples << "chain,seed";
  for (std::size_t k = 0; k < d; ++k) samples << ",x" << k;
  samples << '\n';
  for (std::size_t i = 0; i < chains.size(); ++i) {
    samples << i << ',' << chains[i].seed;
    for (double v : chains[i].final_state()) samples << ',' << fmt(v);
    samples << '\n';
  }
  emit(m, out, "samples.csv", samples.str());

  if (cfg.at("chains.write_trajectories").get<bool>()) {
    std::ostringstream traj;
    traj << "chain,step,t";
    for (std::size_t k = 0; k < d; ++k) traj << ",x" << k;
    traj << '\n';
    for (std::size_t i = 0; i < chains.size(); ++i) {
      const auto& tr = chains[i];
      for (std::size_t k = 0; k < tr.states.size(); ++k) {
        const int t = k < tr.steps.size() ? tr.steps[k].t : 0;
        traj << i << ',' << k << ',' << t;
        for (double v : tr.states[k]) traj << ',' << fmt(v);
        traj << '\n';
      }
    }
    emit(m, out, "trajectories.csv", traj.str());

    if (setup.refine) {
      std::ostringstream rt;
      rt << "chain,t,iter,L,terminated_by\n";
      for (std::size_t i = 0; i < chains.size(); ++i)
        for (const auto& rec : chains[i].steps) {
          if (!rec.refine_trace) continue;
          const RefineTrace& trace = chains[i].refine_traces[static_cast<std::size_t>(*rec.refine_trace)];
          for (std::size_t k = 0; k < trace.losses.size(); ++k)
            rt << i << ',' << rec.t << ',' << k << ',' << fmt(trace.losses[k]) << ',' << to_string(trace.reason) << '\n';
        }
      emit(m, out, "refine_traces.csv", rt.str());
    }
  }

  const Samples gen = final_states(chains, d);
  const Samples ref = reference_draws(st.family, st.label, cfg.at("metrics.reference_points").get<std::size_t>(),
                                      derive_seed(master, Stream::reference_data));
  Rng proj(derive_seed(master, Stream::metrics));
  json metrics;
  metrics["n_samples"] = gen.size();
  metrics["n_reference"] = ref.size();
  metrics["sliced_w1"] = sliced_wasserstein(gen, ref, cfg.at("metrics.projections").get<int>(), proj);
  metrics["mmd2_rbf"] = mmd_rbf(gen, ref, cfg.at("metrics.mmd_bandwidth").get<double>());
  const int k = cfg.at("metrics.knn_k").get<int>();
  if (static_cast<std::size_t>(k) < std::min(gen.size(), ref.size())) {
    const auto [precision, recall] = knn_precision_recall(gen, ref, k);
    metrics["precision"] = precision;
    metrics["recall"] = recall;
  }
  metrics["accumulated_gap"] = accumulated_gap(chains, *st.oracle, st.schedule).accumulated_gap;
  Vec mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < gen.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += gen[i][j] / static_cast<double>(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) var[j] += (gen[i][j] - mean[j]) * (gen[i][j] - mean[j]);
  for (double& v : var) v /= std::max<double>(1.0, static_cast<double>(gen.size()) - 1.0);
  metrics["mean"] = mean;
  metrics["variance"] = var;
  emit(m, out, "metrics.json", metrics.dump(2) + "\n");

  const bool scatter = d >= 2;
  const std::vector<svg::Series> series{samples_series("generated", gen, scatter), samples_series("data", ref, scatter)};
  emit(m, out, "samples.svg",
       scatter ? svg::scatter_plot({"Samples", "x0", "x1"}, series) : svg::histogram({"Samples", "x", "density"}, series));
  finish_run(m, out);
  return m;
}

RunManifest cmd_sweep_omega(const ExperimentConfig& cfg, const fs::path& out) {
  RunManifest m = begin_run(cfg, out, "sweep-omega");
  const Setup st(cfg);
  if (!st.field->has_null_condition()) throw std::invalid_argument("sweep-omega needs a field with a null condition");
  const std::uint64_t master = cfg.seed();
  const auto& sw = cfg.at("sweep");
  const auto n_probes = sw.at("n_probes").get<std::size_t>();
  const double lo = sw.at("omega_min").get<double>(), hi = sw.at("omega_max").get<double>();
  const double step = sw.at("omega_step").get<double>();
  OmegaOptions opts;
  opts.grid_min = lo;
  opts.grid_max = hi;
  opts.grid_resolution = sw.at("grid_resolution").get<double>();
  opts.reading = sw.at("ratio_reading").get<std::string>() == "per_dimension" ? RatioReading::per_dimension
                                                                               : RatioReading::inner_product;

  std::vector<double> omegas;
  const auto n_omega = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  for (std::size_t i = 0; i < n_omega; ++i) omegas.push_back(lo + static_cast<double>(i) * step);

  std::ostringstream curve_csv, table_csv;
  curve_csv << "t,omega,L,estimator,n_probes,seed\n";
  table_csv << "t,estimator,omega_star,L_at_omega_star,L_at_one,n_probes,seed\n";
  std::vector<svg::Series> plot;
  for (int t : sweep_steps(cfg, st.schedule.T())) {
    const ProbeEvaluation ev = probe_step(st, t, n_probes, master);
    const auto losses = kernels::l_of_omega_curve(ev, omegas);
    svg::Series s{"t=" + std::to_string(t), omegas, losses};
    for (std::size_t i = 0; i < omegas.size(); ++i)
      curve_csv << t << ',' << fmt(omegas[i]) << ',' << fmt(losses[i]) << ",curve," << n_probes << ',' << master
                << '\n';
    const double l1 = l_of_omega(ev, 1.0);
    for (auto est : {OmegaEstimator::least_squares, OmegaEstimator::eq9_mean_of_ratios, OmegaEstimator::grid}) {
      table_csv << t << ',' << to_string(est) << ',';
      try {
        const OmegaEstimate e = omega_star(ev, est, opts);
        table_csv << fmt(e.value) << ',' << fmt(l_of_omega(ev, e.value));
        curve_csv << t << ',' << fmt(e.value) << ',' << fmt(l_of_omega(ev, e.value)) << ',' << to_string(est) << ','
                  << n_probes << ',' << master << '\n';
      } catch (const DegenerateGuidance&) {
        table_csv << "degenerate,";
      }
      table_csv << ',' << fmt(l1) << ',' << n_probes << ',' << master << '\n';
    }
    plot.push_back(std::move(s));
  }
  emit(m, out, "sweep.csv", curve_csv.str());
  emit(m, out, "omega_star.csv", table_csv.str());
  emit(m, out, "sweep.svg", svg::line_plot({"Score deviation against guidance weight", "omega", "L(omega)", true}, plot));
  finish_run(m, out);
  return m;
}

RunManifest cmd_gap_report(const ExperimentConfig& cfg, const fs::path& out) {
  RunManifest m = begin_run(cfg, out, "gap-report");
  const Setup st(cfg);
  const std::uint64_t master = cfg.seed();

  ChainSetup setup;
  setup.schedule = &st.schedule;
  setup.field = st.field;
  setup.guidance = cfg.guidance();
  setup.sampler = cfg.sampler();
  setup.refine = cfg.refine();
  setup.oracle = st.oracle.get();
  setup.family = &st.family;
  const auto seeds = chain_seeds(master, cfg.at("chains.count").get<std::size_t>());
  const auto chains = kernels::run_chains(setup, st.label, seeds);
  GapReport report = accumulated_gap(chains, *st.oracle, st.schedule);

  if (st.field->has_null_condition()) {
    const auto n_probes = cfg.at("gap.n_probes").get<std::size_t>();
    const bool with_star = cfg.at("gap.omega_star").get<bool>();
    for (auto& e : report.steps) {
      const ProbeEvaluation ev = probe_step(st, e.t, n_probes, master);
      const double w = setup.guidance.mode == GuidanceMode::cfg ? setup.guidance.omega_at(e.t) : 1.0;
      e.l_at_one = l_of_omega(ev, 1.0);
      e.l_at_used = l_of_omega(ev, w);
      e.l_probe_count = n_probes;
      if (with_star) {
        try {
          e.omega_star = omega_star(ev, OmegaEstimator::least_squares).value;
        } catch (const DegenerateGuidance&) {
        }
      }
    }
  }

  emit(m, out, "gap.csv", report.to_csv());
  json summary = report.summary();
  summary["guidance"] = setup.guidance.to_json();
  summary["steps"] = report.steps.size();
  emit(m, out, "gap_summary.json", summary.dump(2) + "\n");
  svg::Series g{"pointwise gap", {}, {}}, l1{"L(1)", {}, {}};
  for (const auto& e : report.steps) {
    g.x.push_back(e.t);
    g.y.push_back(e.gap);
    if (e.l_at_one) {
      l1.x.push_back(e.t);
      l1.y.push_back(*e.l_at_one);
    }
  }
  std::vector<svg::Series> plot{g};
  if (!l1.x.empty()) plot.push_back(l1);
  emit(m, out, "gap.svg", svg::line_plot({"Per-step score gap", "t", "squared score error", true}, plot));
  finish_run(m, out);
  return m;
}

RunManifest cmd_refine_compare(const ExperimentConfig& cfg, const fs::path& out) {
  RunManifest m = begin_run(cfg, out, "refine-compare");
  const CompareReport report = refine_compare(cfg);

  std::ostringstream csv;
  csv << "replicate,seed,arm,accumulated_gap,sliced_w1,refine_steps,refine_improved\n";
  std::vector<svg::Series> plot;
  for (int a = 0; a < kCompareArms; ++a) plot.push_back({to_string(static_cast<CompareArm>(a)), {}, {}});
  for (std::size_t k = 0; k < report.replicates.size(); ++k) {
    const auto& r = report.replicates[k];
    for (int a = 0; a < kCompareArms; ++a) {
      const auto& res = r.arms[a];
      csv << k << ',' << r.seed << ',' << to_string(static_cast<CompareArm>(a)) << ',' << fmt(res.accumulated_gap)
          << ',' << fmt(res.sliced_w1) << ',' << res.refine_steps << ',' << res.refine_improved << '\n';
      plot[static_cast<std::size_t>(a)].x.push_back(static_cast<double>(k));
      plot[static_cast<std::size_t>(a)].y.push_back(res.accumulated_gap);
    }
  }
  emit(m, out, "compare.csv", csv.str());

  std::ostringstream omega_csv;
  omega_csv << "replicate,t,omega_star\n";
  for (std::size_t k = 0; k < report.replicates.size(); ++k)
    for (int t : report.steps)
      omega_csv << k << ',' << t << ',' << fmt(report.replicates[k].omega_by_t[static_cast<std::size_t>(t)]) << '\n';
  emit(m, out, "omega_star.csv", omega_csv.str());

  json summary;
  summary["replicates"] = report.replicates.size();
  summary["omega_star_wins"] = report.omega_star_wins();
  summary["refine_always_improves"] = report.refine_always_improves();
  for (int a = 0; a < kCompareArms; ++a) {
    double gap = 0.0, w1 = 0.0;
    for (const auto& r : report.replicates) gap += r.arms[a].accumulated_gap, w1 += r.arms[a].sliced_w1;
    const double n = static_cast<double>(std::max<std::size_t>(1, report.replicates.size()));
    summary["arms"][to_string(static_cast<CompareArm>(a))] = {{"mean_accumulated_gap", gap / n},
                                                             {"mean_sliced_w1", w1 / n}};
  }
  emit(m, out, "compare_summary.json", summary.dump(2) + "\n");
  emit(m, out, "compare.svg",
       svg::line_plot({"Accumulated gap per replicate", "replicate", "accumulated gap", true}, plot));
  finish_run(m, out);
  return m;
}

std::vector<std::string> command_names() { return {"train", "sample", "sweep-omega", "gap-report", "refine-compare"}; }

RunManifest run_command(const std::string& name, const ExperimentConfig& cfg, const fs::path& out) {
  if (name == "train") return cmd_train(cfg, out);
  if (name == "sample") return cmd_sample(cfg, out);
  if (name == "sweep-omega") return cmd_sweep_omega(cfg, out);
  if (name == "gap-report") return cmd_gap_report(cfg, out);
  if (name == "refine-compare") return cmd_refine_compare(cfg, out);
  throw std::invalid_argument("unknown command '" + name + "'");
}

}  // namespace gaplab
