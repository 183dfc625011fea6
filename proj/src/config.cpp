#include "gaplab/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "gaplab/mlp.hpp"
#include "gaplab/persist.hpp"

namespace gaplab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                    (errors.size() == 1 ? "" : "s") + ")";
  for (const auto& e : errors) out += "\n  - " + e;
  return out;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

std::string kind_name(const json& j) {
  if (j.is_number()) return "number";
  return j.type_name();
}

// Copies `src` over `dst`, refusing keys `dst` does not define.
void merge_into(json& dst, const json& src, const std::string& prefix, std::vector<std::string>& errors) {
  if (!src.is_object()) {
    errors.push_back((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
    return;
  }
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) {
      errors.push_back(key + ": unknown key");
      continue;
    }
    json& target = dst[it.key()];
    if (target.is_object()) {
      merge_into(target, it.value(), key, errors);
    } else if (!same_kind(target, it.value())) {
      errors.push_back(key + ": expected " + kind_name(target) + ", got " + kind_name(it.value()));
    } else {
      target = it.value();
    }
  }
}

template <class F>
void check(std::vector<std::string>& errors, const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    errors.insert(errors.end(), e.errors().begin(), e.errors().end());
  } catch (const std::exception& e) {
    errors.push_back(where + ": " + e.what());
  }
}

void require(std::vector<std::string>& errors, bool ok, const std::string& msg) {
  if (!ok) errors.push_back(msg);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

json default_config() {
  return json::parse(R"({
    "seed": 0,
    "family": "bimodal-1d",
    "family_sha256": "",
    "label": 0,
    "schedule": {"T": 1000, "beta_start": 1e-4, "beta_end": 0.02},
    "field": {
      "kind": "oracle",
      "checkpoint": "",
      "perturbation": {"kind": "constant_vector", "scale": 0.0, "seed": 0, "include_null": false, "direction": []}
    },
    "guidance": {"mode": "cfg", "omega": 1.0, "omega_by_t": []},
    "sampler": {"kind": "ddim", "steps": 0, "corrector_iters": 1, "snr_target": 0.16, "langevin_max_step": 0.01},
    "refine": {"enabled": false, "eta": 0.05, "threshold": 1e-3, "max_iters": 50, "sign": "descent",
               "eps_mode": "resample_each_iter", "convergence_rule": "loss_delta"},
    "chains": {"count": 256, "write_trajectories": true},
    "train": {"hidden": [64, 64], "steps": 2000, "batch_size": 128, "learning_rate": 1e-3, "momentum": 0.9,
              "data_points": 10000, "p_uncond": 0.1, "log_every": 50, "checkpoint": "model.ckpt"},
    "sweep": {"t_values": [], "n_t": 10, "n_probes": 10000, "omega_min": -2.0, "omega_max": 6.0,
              "omega_step": 0.05, "grid_resolution": 1e-3, "ratio_reading": "inner_product"},
    "gap": {"n_probes": 256, "omega_star": true},
    "compare": {"n_seeds": 20, "chains_per_seed": 16, "n_probes": 1000},
    "metrics": {"reference_points": 2000, "projections": 64, "mmd_bandwidth": 0.5, "knn_k": 3}
  })");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError({"--set '" + assignment + "': expected key=value"});
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError({key + ": unknown key"});
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) {
    std::vector<std::string> errors;
    merge_into(*node, value, key, errors);
    if (!errors.empty()) throw ConfigError(errors);
    return;
  }
  if (!same_kind(*node, value))
    throw ConfigError({key + ": expected " + kind_name(*node) + ", got " + kind_name(value)});
  *node = value;
}

ExperimentConfig ExperimentConfig::resolve(const std::optional<fs::path>& file, std::span<const std::string> overrides,
                                           std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError({"cannot open config file " + file->string()});
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError({file->string() + ": not valid JSON"});
    if (j.is_object() && j.contains("format_version") && j.contains("config")) {
      j = RunManifest::from_json(j).config;
    }
    merge_into(cfg.doc, j, "", errors);
  }
  for (const auto& o : overrides) {
    try {
      apply_override(cfg.doc, o);
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.errors().begin(), e.errors().end());
    }
  }
  if (seed) cfg.doc["seed"] = *seed;
  cfg.resolve_errors = std::move(errors);
  return cfg;
}

const json& ExperimentConfig::at(const std::string& dotted) const {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    node = &node->at(dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

std::uint64_t ExperimentConfig::seed() const { return doc.at("seed").get<std::uint64_t>(); }

NoiseSchedule ExperimentConfig::schedule() const {
  const auto& s = doc.at("schedule");
  return linear_schedule(s.at("T").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>());
}

ConditionedMixtureFamily ExperimentConfig::family() const {
  const auto name = doc.at("family").get<std::string>();
  const auto presets = preset_names();
  if (std::find(presets.begin(), presets.end(), name) != presets.end()) return preset_family(name);
  return load_family(name);
}

ConditionLabel ExperimentConfig::label() const { return ConditionLabel::of_class(doc.at("label").get<int>()); }

GuidanceSpec ExperimentConfig::guidance() const { return GuidanceSpec::from_json(doc.at("guidance")); }

SamplerConfig ExperimentConfig::sampler() const { return SamplerConfig::from_json(doc.at("sampler")); }

std::optional<RefineConfig> ExperimentConfig::refine() const {
  const auto& r = doc.at("refine");
  if (!r.at("enabled").get<bool>()) return std::nullopt;
  return RefineConfig::from_json(r);
}

ScoreFieldPtr ExperimentConfig::field(const NoiseSchedule& s, const ConditionedMixtureFamily& f) const {
  const auto& fj = doc.at("field");
  const auto kind = fj.at("kind").get<std::string>();
  if (kind == "oracle") return oracle_field(f, s);
  if (kind == "perturbed") {
    json p = fj.at("perturbation");
    if (p.at("direction").empty()) p.erase("direction");
    return perturbed_field(oracle_field(f, s), PerturbationSpec::from_json(p));
  }
  if (kind == "mlp") {
    auto model = std::make_shared<MlpScoreModel>(load_checkpoint(fj.at("checkpoint").get<std::string>()));
    if (model->data_dim != f.dim() || model->num_classes != f.num_classes())
      throw std::invalid_argument("checkpoint shape does not match family " + f.name());
    return std::make_shared<MlpField>(std::move(model), s);
  }
  throw std::invalid_argument("field.kind: unknown value '" + kind + "' (expected oracle, perturbed or mlp)");
}

std::string family_hash(const ConditionedMixtureFamily& f) { return sha256_hex(f.to_json().dump()); }

void ExperimentConfig::validate() const {
  std::vector<std::string> errors = resolve_errors;
  std::optional<NoiseSchedule> sched;
  std::optional<ConditionedMixtureFamily> fam;
  check(errors, "schedule", [&] { sched = schedule(); });
  check(errors, "family", [&] { fam = family(); });
  if (fam) {
    const auto expected = doc.at("family_sha256").get<std::string>();
    require(errors, expected.empty() || expected == family_hash(*fam),
            "family_sha256: family '" + doc.at("family").get<std::string>() + "' no longer matches the recorded hash");
    const int label_value = doc.at("label").get<int>();
    require(errors, label_value >= 0 && label_value < fam->num_classes(),
            "label: " + std::to_string(label_value) + " is not a class of family '" + fam->name() + "'");
  }
  check(errors, "guidance", [&] {
    const auto g = guidance();
    if (sched && !g.omega_by_t.empty() && g.omega_by_t.size() != static_cast<std::size_t>(sched->T()) + 1)
      throw std::invalid_argument("omega_by_t must have T + 1 entries");
  });
  check(errors, "sampler", [&] {
    const auto sc = sampler();
    if (sched) sc.validate(sched->T());
  });
  check(errors, "refine", [&] { RefineConfig::from_json(doc.at("refine")).validate(); });
  check(errors, "field", [&] {
    const auto kind = doc.at("field").at("kind").get<std::string>();
    if (kind != "oracle" && kind != "perturbed" && kind != "mlp")
      throw std::invalid_argument("kind: unknown value '" + kind + "' (expected oracle, perturbed or mlp)");
    json p = doc.at("field").at("perturbation");
    if (p.at("direction").empty()) p.erase("direction");
    const auto spec = PerturbationSpec::from_json(p);
    if (!(spec.scale >= 0.0)) throw std::invalid_argument("perturbation.scale must be >= 0");
    if (fam && !spec.direction.empty() && spec.direction.size() != fam->dim())
      throw std::invalid_argument("perturbation.direction has the wrong dimension");
    if (kind == "mlp") {
      const auto ck = doc.at("field").at("checkpoint").get<std::string>();
      if (ck.empty() || !fs::exists(ck)) throw std::invalid_argument("checkpoint '" + ck + "' does not exist");
    }
  });

  auto positive_int = [&](const std::string& key) {
    check(errors, key, [&] { require(errors, at(key).get<std::int64_t>() > 0, key + ": must be positive"); });
  };
  for (const char* key : {"chains.count", "train.steps", "train.batch_size", "train.data_points", "train.log_every",
                          "sweep.n_t", "sweep.n_probes", "gap.n_probes", "compare.n_seeds", "compare.chains_per_seed",
                          "compare.n_probes", "metrics.reference_points", "metrics.projections", "metrics.knn_k"})
    positive_int(key);
  check(errors, "train", [&] {
    const auto& t = doc.at("train");
    require(errors, t.at("learning_rate").get<double>() > 0.0, "train.learning_rate: must be positive");
    const double mom = t.at("momentum").get<double>();
    require(errors, mom >= 0.0 && mom < 1.0, "train.momentum: must lie in [0, 1)");
    const double pu = t.at("p_uncond").get<double>();
    require(errors, pu >= 0.0 && pu <= 1.0, "train.p_uncond: must lie in [0, 1]");
    for (const auto& w : t.at("hidden"))
      require(errors, w.is_number_integer() && w.get<std::int64_t>() > 0, "train.hidden: widths must be positive integers");
    require(errors, !t.at("checkpoint").get<std::string>().empty(), "train.checkpoint: must name a file");
  });
  check(errors, "sweep", [&] {
    const auto& s = doc.at("sweep");
    require(errors, s.at("omega_max").get<double>() >= s.at("omega_min").get<double>(),
            "sweep.omega_max: must be >= sweep.omega_min");
    require(errors, s.at("omega_step").get<double>() > 0.0, "sweep.omega_step: must be positive");
    require(errors, s.at("grid_resolution").get<double>() > 0.0, "sweep.grid_resolution: must be positive");
    const auto reading = s.at("ratio_reading").get<std::string>();
    require(errors, reading == "inner_product" || reading == "per_dimension",
            "sweep.ratio_reading: expected inner_product or per_dimension");
    for (const auto& t : s.at("t_values")) {
      const bool ok = t.is_number_integer() && sched && t.get<int>() >= 1 && t.get<int>() <= sched->T();
      require(errors, ok, "sweep.t_values: every entry must be a step in [1, T]");
    }
  });
  check(errors, "metrics", [&] {
    require(errors, doc.at("metrics").at("mmd_bandwidth").get<double>() > 0.0, "metrics.mmd_bandwidth: must be positive");
  });
  if (!errors.empty()) throw ConfigError(errors);
}

}  // namespace gaplab
