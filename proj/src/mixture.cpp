#include "gaplab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace gaplab {

namespace {

constexpr double kWeightTolerance = 1e-12;

void check_simplex(const std::vector<double>& w, const char* what) {
  if (w.empty()) throw std::invalid_argument(std::string(what) + ": empty");
  double sum = 0.0;
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": entries must be positive");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kWeightTolerance)
    throw std::invalid_argument(std::string(what) + ": entries must sum to 1");
}

// log w_k + log N(x; mu_k, var_k) for every component.
std::vector<double> component_log_terms(const GaussianMixture& m, std::span<const double> x) {
  require_same_dim(x.size(), m.dim(), "mixture evaluation");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  std::vector<double> out(m.components());
  for (std::size_t k = 0; k < m.components(); ++k) {
    const Vec& mu = m.means()[k];
    const Vec& var = m.variances()[k];
    double acc = std::log(m.weights()[k]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mu[i];
      acc -= 0.5 * (log2pi + std::log(var[i]) + d * d / var[i]);
    }
    out[k] = acc;
  }
  return out;
}

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

GaussianMixture make_unconditional(const std::vector<double>& priors, const std::vector<GaussianMixture>& classes) {
  std::vector<double> w;
  std::vector<Vec> mu, var;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& m = classes[c];
    for (std::size_t k = 0; k < m.components(); ++k) {
      w.push_back(priors[c] * m.weights()[k]);
      mu.push_back(m.means()[k]);
      var.push_back(m.variances()[k]);
    }
  }
  // Renormalise away the rounding in the products so the simplex check holds.
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return GaussianMixture(std::move(w), std::move(mu), std::move(var));
}

}  // namespace

ConditionLabel ConditionLabel::of_class(int c) {
  if (c < 0) throw std::invalid_argument("class index must be non-negative");
  return ConditionLabel(c);
}

int ConditionLabel::index() const {
  if (is_null()) throw std::logic_error("null condition has no class index");
  return index_;
}

ConditionLabel ConditionLabel::parse(const std::string& text) {
  if (text == "null" || text == "none" || text == "") return null();
  std::size_t pos = 0;
  const int c = std::stoi(text, &pos);
  if (pos != text.size()) throw std::invalid_argument("bad condition label '" + text + "'");
  return of_class(c);
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vec> means, std::vector<Vec> variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  check_simplex(weights_, "GaussianMixture weights");
  if (means_.size() != weights_.size() || variances_.size() != weights_.size())
    throw std::invalid_argument("GaussianMixture: weights, means and variances differ in length");
  const std::size_t d = means_.front().size();
  if (d == 0) throw std::invalid_argument("GaussianMixture: zero dimension");
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (means_[k].size() != d || variances_[k].size() != d)
      throw std::invalid_argument("GaussianMixture: components do not share a dimension");
    for (double v : variances_[k])
      if (!(v > 0.0)) throw std::invalid_argument("GaussianMixture: variances must be positive");
  }
}

double log_density(const GaussianMixture& m, std::span<const double> x) {
  const auto terms = component_log_terms(m, x);
  return log_sum_exp(terms);
}

Vec score(const GaussianMixture& m, std::span<const double> x) {
  const auto terms = component_log_terms(m, x);
  const double mx = *std::max_element(terms.begin(), terms.end());
  // The max term contributes exp(0) = 1, so the normaliser is never below 1.
  std::vector<double> r(terms.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    r[k] = std::exp(terms[k] - mx);
    norm += r[k];
  }
  Vec out(x.size(), 0.0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double rk = r[k] / norm;
    if (rk == 0.0) continue;
    const Vec& mu = m.means()[k];
    const Vec& var = m.variances()[k];
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += rk * (mu[i] - x[i]) / var[i];
  }
  return out;
}

GaussianMixture diffused(const GaussianMixture& m, const NoiseSchedule& s, int t) {
  const double ab = s.alpha_bar(t);
  const double bb = s.beta_bar(t);
  const double a = std::sqrt(ab);
  std::vector<Vec> mu = m.means();
  std::vector<Vec> var = m.variances();
  for (auto& v : mu)
    for (double& x : v) x *= a;
  for (auto& v : var)
    for (double& x : v) x = ab * x + bb;
  return GaussianMixture(m.weights(), std::move(mu), std::move(var));
}

Vec sample(const GaussianMixture& m, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(m.weights().begin(), m.weights().end());
  const std::size_t k = pick(rng);
  Vec z = standard_normal(rng, m.dim());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = m.means()[k][i] + std::sqrt(m.variances()[k][i]) * z[i];
  return z;
}

ConditionedMixtureFamily::ConditionedMixtureFamily(std::vector<double> class_priors,
                                                   std::vector<GaussianMixture> per_class, std::string name)
    : name_(std::move(name)),
      priors_(std::move(class_priors)),
      per_class_(std::move(per_class)),
      unconditional_([&] {
        check_simplex(priors_, "class priors");
        if (per_class_.size() != priors_.size())
          throw std::invalid_argument("family: one mixture per class prior required");
        for (const auto& m : per_class_)
          if (m.dim() != per_class_.front().dim())
            throw std::invalid_argument("family: classes do not share a dimension");
        return make_unconditional(priors_, per_class_);
      }()) {}

const GaussianMixture& ConditionedMixtureFamily::for_label(ConditionLabel c) const {
  if (c.is_null()) return unconditional_;
  if (c.index() >= num_classes())
    throw std::out_of_range("class " + c.str() + " not in family with " + std::to_string(num_classes()) + " classes");
  return per_class_[static_cast<std::size_t>(c.index())];
}

nlohmann::json ConditionedMixtureFamily::to_json() const {
  nlohmann::json j;
  j["priors"] = priors_;
  j["classes"] = nlohmann::json::array();
  for (const auto& m : per_class_)
    j["classes"].push_back({{"weights", m.weights()}, {"means", m.means()}, {"variances", m.variances()}});
  return j;
}

ConditionedMixtureFamily ConditionedMixtureFamily::from_json(const nlohmann::json& j, std::string name) {
  std::vector<GaussianMixture> classes;
  for (const auto& c : j.at("classes"))
    classes.emplace_back(c.at("weights").get<std::vector<double>>(), c.at("means").get<std::vector<Vec>>(),
                         c.at("variances").get<std::vector<Vec>>());
  return ConditionedMixtureFamily(j.at("priors").get<std::vector<double>>(), std::move(classes), std::move(name));
}

ClassPosterior classifier(const ConditionedMixtureFamily& f, const NoiseSchedule& s, std::span<const double> x, int t) {
  const std::size_t K = static_cast<std::size_t>(f.num_classes());
  std::vector<double> logits(K);
  std::vector<Vec> class_scores(K);
  for (std::size_t c = 0; c < K; ++c) {
    const GaussianMixture m = diffused(f.classes()[c], s, t);
    logits[c] = std::log(f.priors()[c]) + log_density(m, x);
    class_scores[c] = score(m, x);
  }
  const double lse = log_sum_exp(logits);
  ClassPosterior out;
  out.probabilities.resize(K);
  for (std::size_t c = 0; c < K; ++c) out.probabilities[c] = std::exp(logits[c] - lse);
  // grad log q(c|x) = sum_k q_k (s_c - s_k). Same value as s_c - s_null, but it keeps
  // full relative precision when the posterior saturates and the gradient is tiny.
  out.log_prob_gradients.assign(K, Vec(x.size(), 0.0));
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t k = 0; k < K; ++k) {
      if (k == c) continue;
      for (std::size_t j = 0; j < x.size(); ++j)
        out.log_prob_gradients[c][j] += out.probabilities[k] * (class_scores[c][j] - class_scores[k][j]);
    }
  return out;
}

std::vector<std::string> preset_names() { return {"bimodal-1d", "two-moons-like", "single-gaussian"}; }

ConditionedMixtureFamily preset_family(const std::string& name) {
  if (name == "bimodal-1d") {
    // Two overlapping classes at -1 and +1 (sd 0.5); the unconditional law is bimodal.
    return ConditionedMixtureFamily({0.5, 0.5},
                                    {GaussianMixture({1.0}, {{-1.0}}, {{0.25}}),
                                     GaussianMixture({1.0}, {{1.0}}, {{0.25}})},
                                    name);
  }
  if (name == "two-moons-like") {
    // Eight components on a radius-3 ring; class 0 owns the upper arc, class 1 the lower.
    constexpr double radius = 3.0;
    constexpr double var = 0.1;
    std::vector<Vec> upper, lower;
    for (int k = 0; k < 8; ++k) {
      const double a = (k + 0.5) * std::numbers::pi / 4.0;
      Vec p{radius * std::cos(a), radius * std::sin(a)};
      (k < 4 ? upper : lower).push_back(p);
    }
    const std::vector<Vec> vars(4, Vec{var, var});
    const std::vector<double> w(4, 0.25);
    return ConditionedMixtureFamily({0.5, 0.5}, {GaussianMixture(w, upper, vars), GaussianMixture(w, lower, vars)},
                                    name);
  }
  if (name == "single-gaussian") {
    return ConditionedMixtureFamily({1.0}, {GaussianMixture({1.0}, {{1.5, -0.5}}, {{0.5, 2.0}})}, name);
  }
  throw std::invalid_argument("unknown family preset '" + name + "'");
}

ConditionedMixtureFamily load_family(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open family file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("family file " + path.string() + ": " + e.what());
  }
  return ConditionedMixtureFamily::from_json(j, path.stem().string());
}

}  // namespace gaplab
