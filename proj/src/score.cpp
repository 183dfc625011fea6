#include "gaplab/score.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "gaplab/rng.hpp"

namespace gaplab {

namespace {

std::uint64_t label_code(ConditionLabel c) {
  return c.is_null() ? 0xffffffffULL : static_cast<std::uint64_t>(c.index());
}

double checked_noise_scale(const NoiseSchedule& s, int t) {
  const double bb = s.beta_bar(t);
  if (!(bb > 0.0)) throw std::invalid_argument("eps/score conversion undefined at t=" + std::to_string(t));
  return std::sqrt(bb);
}

}  // namespace

Vec score_from_eps(std::span<const double> eps, const NoiseSchedule& s, int t) {
  const double k = checked_noise_scale(s, t);
  Vec out(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) out[i] = -eps[i] / k;
  return out;
}

Vec eps_from_score(std::span<const double> score, const NoiseSchedule& s, int t) {
  const double k = checked_noise_scale(s, t);
  Vec out(score.size());
  for (std::size_t i = 0; i < score.size(); ++i) out[i] = -score[i] * k;
  return out;
}

OracleField::OracleField(ConditionedMixtureFamily family, NoiseSchedule schedule)
    : family_(std::move(family)), schedule_(std::move(schedule)) {
  const int K = family_.num_classes();
  tables_.reserve(static_cast<std::size_t>(schedule_.T()) + 1);
  for (int t = 0; t <= schedule_.T(); ++t) {
    std::vector<GaussianMixture> row;
    row.reserve(static_cast<std::size_t>(K) + 1);
    for (int c = 0; c < K; ++c) row.push_back(diffused(family_.classes()[static_cast<std::size_t>(c)], schedule_, t));
    row.push_back(diffused(family_.unconditional(), schedule_, t));
    tables_.push_back(std::move(row));
  }
}

const GaussianMixture& OracleField::diffused_mixture(int t, ConditionLabel c) const {
  const auto& row = tables_.at(static_cast<std::size_t>(schedule_.check_index(t)));
  if (c.is_null()) return row.back();
  if (c.index() >= family_.num_classes()) throw std::out_of_range("class " + c.str() + " out of range");
  return row[static_cast<std::size_t>(c.index())];
}

Vec OracleField::score_at(std::span<const double> x, int t, ConditionLabel c) const {
  return score(diffused_mixture(t, c), x);
}

nlohmann::json OracleField::describe() const {
  return {{"kind", "oracle"}, {"family", family_.name()}};
}

std::string to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::constant_vector: return "constant_vector";
    case PerturbationKind::scaled_gaussian_field: return "scaled_gaussian_field";
    case PerturbationKind::scaled_score_direction: return "scaled_score_direction";
  }
  return "?";
}

PerturbationKind perturbation_kind_from_string(const std::string& s) {
  if (s == "constant_vector") return PerturbationKind::constant_vector;
  if (s == "scaled_gaussian_field") return PerturbationKind::scaled_gaussian_field;
  if (s == "scaled_score_direction") return PerturbationKind::scaled_score_direction;
  throw std::invalid_argument("unknown perturbation kind '" + s + "'");
}

nlohmann::json PerturbationSpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}, {"scale", scale}, {"seed", seed}, {"include_null", include_null}};
  if (!direction.empty()) j["direction"] = direction;
  return j;
}

PerturbationSpec PerturbationSpec::from_json(const nlohmann::json& j) {
  PerturbationSpec p;
  p.kind = perturbation_kind_from_string(j.value("kind", std::string("constant_vector")));
  p.scale = j.value("scale", 0.0);
  p.seed = j.value("seed", std::uint64_t{0});
  p.include_null = j.value("include_null", false);
  if (j.contains("direction")) p.direction = j.at("direction").get<Vec>();
  return p;
}

PerturbedField::PerturbedField(ScoreFieldPtr base, PerturbationSpec spec) : base_(std::move(base)), spec_(std::move(spec)) {
  if (!base_) throw std::invalid_argument("PerturbedField: null base field");
  if (!(spec_.scale >= 0.0)) throw std::invalid_argument("PerturbedField: scale must be >= 0");
  if (!spec_.direction.empty()) {
    require_same_dim(spec_.direction.size(), base_->dim(), "perturbation direction");
    const double n = std::sqrt(squared_norm(spec_.direction));
    if (!(n > 0.0)) throw std::invalid_argument("PerturbedField: zero direction");
    for (double& v : spec_.direction) v /= n;
  }
}

Vec PerturbedField::error_at(std::span<const double> x, int t, ConditionLabel c) const {
  const std::size_t d = base_->dim();
  if (spec_.scale == 0.0 || (c.is_null() && !spec_.include_null)) return Vec(d, 0.0);
  switch (spec_.kind) {
    case PerturbationKind::constant_vector: {
      Vec v = spec_.direction;
      if (v.empty()) {
        Rng rng(derive_seed(spec_.seed, static_cast<std::uint64_t>(t), label_code(c)));
        do {
          v = standard_normal(rng, d);
        } while (squared_norm(v) == 0.0);
        const double n = std::sqrt(squared_norm(v));
        for (double& e : v) e /= n;
      }
      for (double& e : v) e *= spec_.scale;
      return v;
    }
    case PerturbationKind::scaled_gaussian_field: {
      std::uint64_t h = derive_seed(spec_.seed, static_cast<std::uint64_t>(t), label_code(c));
      for (double xi : x) h = mix64(h ^ std::bit_cast<std::uint64_t>(xi));
      Rng rng(h);
      Vec z = standard_normal(rng, d);
      for (double& e : z) e *= spec_.scale;
      return z;
    }
    case PerturbationKind::scaled_score_direction: {
      Vec s = base_->score_at(x, t, c);
      for (double& e : s) e *= -spec_.scale;
      return s;
    }
  }
  return Vec(d, 0.0);
}

Vec PerturbedField::score_at(std::span<const double> x, int t, ConditionLabel c) const {
  Vec s = base_->score_at(x, t, c);
  if (spec_.scale == 0.0) return s;
  const Vec e = error_at(x, t, c);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += e[i];
  return s;
}

nlohmann::json PerturbedField::describe() const {
  return {{"kind", "perturbed"}, {"base", base_->describe()}, {"perturbation", spec_.to_json()}};
}

std::shared_ptr<OracleField> oracle_field(const ConditionedMixtureFamily& f, const NoiseSchedule& s) {
  return std::make_shared<OracleField>(f, s);
}

ScoreFieldPtr perturbed_field(ScoreFieldPtr base, const PerturbationSpec& p) {
  return std::make_shared<PerturbedField>(std::move(base), p);
}

}  // namespace gaplab
