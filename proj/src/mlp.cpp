#include "gaplab/mlp.hpp"

#include <cmath>
#include <string>

namespace gaplab {

std::size_t MlpScoreModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

std::vector<double> MlpScoreModel::flat_parameters() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    p.insert(p.end(), weights[l].begin(), weights[l].end());
    p.insert(p.end(), biases[l].begin(), biases[l].end());
  }
  return p;
}

void MlpScoreModel::set_flat_parameters(std::span<const double> p) {
  if (p.size() != parameter_count())
    throw std::invalid_argument("parameter vector has " + std::to_string(p.size()) + " entries, model needs " +
                                std::to_string(parameter_count()));
  std::size_t off = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (double& w : weights[l]) w = p[off++];
    for (double& b : biases[l]) b = p[off++];
  }
}

std::size_t mlp_input_dim(std::size_t data_dim, int num_classes, int frequencies) {
  return data_dim + 2 * static_cast<std::size_t>(frequencies) + static_cast<std::size_t>(num_classes) + 1;
}

MlpScoreModel make_mlp(std::size_t data_dim, int num_classes, const std::vector<std::size_t>& hidden,
                       std::uint64_t seed, bool zero_output_layer, int frequencies) {
  if (data_dim == 0 || num_classes < 1) throw std::invalid_argument("make_mlp: bad data_dim or class count");
  MlpScoreModel m;
  m.data_dim = data_dim;
  m.num_classes = num_classes;
  m.frequencies = frequencies;
  m.seed = seed;
  m.widths.push_back(mlp_input_dim(data_dim, num_classes, frequencies));
  m.widths.insert(m.widths.end(), hidden.begin(), hidden.end());
  m.widths.push_back(data_dim);

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    const std::size_t in = m.widths[l], out = m.widths[l + 1];
    const bool last = l + 2 == m.widths.size();
    std::vector<double> w(in * out, 0.0);
    if (!(last && zero_output_layer)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (double& v : w) v = u(rng);
    }
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(out, 0.0);
  }
  return m;
}

Vec encode_input(const MlpScoreModel& m, std::span<const double> x, int t, ConditionLabel c) {
  require_same_dim(x.size(), m.data_dim, "mlp input");
  Vec in;
  in.reserve(m.input_dim());
  in.insert(in.end(), x.begin(), x.end());
  const double log_base = std::log(10000.0);
  for (int k = 0; k < m.frequencies; ++k) {
    const double w = std::exp(-log_base * k / m.frequencies);
    in.push_back(std::sin(t * w));
    in.push_back(std::cos(t * w));
  }
  const std::size_t slot = c.is_null() ? static_cast<std::size_t>(m.num_classes) : static_cast<std::size_t>(c.index());
  if (!c.is_null() && c.index() >= m.num_classes) throw std::out_of_range("mlp: class " + c.str() + " out of range");
  for (int k = 0; k <= m.num_classes; ++k) in.push_back(static_cast<std::size_t>(k) == slot ? 1.0 : 0.0);
  return in;
}

MlpForward mlp_forward(const MlpScoreModel& m, std::span<const double> x, int t, ConditionLabel c) {
  MlpForward f;
  f.cache.layer_outputs.reserve(m.layers() + 1);
  f.cache.layer_outputs.push_back(encode_input(m, x, t, c));
  for (std::size_t l = 0; l < m.layers(); ++l) {
    const Vec& h = f.cache.layer_outputs.back();
    const std::size_t in = m.widths[l], out = m.widths[l + 1];
    const bool last = l + 1 == m.layers();
    Vec z(m.biases[l]);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = m.weights[l].data() + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * h[i];
      z[o] += acc;
      if (!last) z[o] = std::tanh(z[o]);
    }
    f.cache.layer_outputs.push_back(std::move(z));
  }
  f.eps = f.cache.layer_outputs.back();
  return f;
}

void mlp_backward(const MlpScoreModel& m, const MlpActivations& cache, std::span<const double> d_output,
                  std::span<double> grad) {
  if (grad.size() != m.parameter_count()) throw std::invalid_argument("mlp_backward: gradient buffer size");
  // Offsets of each layer's block in the flat layout.
  std::vector<std::size_t> offset(m.layers());
  std::size_t off = 0;
  for (std::size_t l = 0; l < m.layers(); ++l) {
    offset[l] = off;
    off += m.weights[l].size() + m.biases[l].size();
  }

  Vec delta(d_output.begin(), d_output.end());  // dL/dz for the current layer
  for (std::size_t l = m.layers(); l-- > 0;) {
    const Vec& h = cache.layer_outputs[l];
    const std::size_t in = m.widths[l], out = m.widths[l + 1];
    double* gw = grad.data() + offset[l];
    double* gb = gw + m.weights[l].size();
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * h[i];
    }
    if (l == 0) break;
    Vec next(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = m.weights[l].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) next[i] += row[i] * delta[o];
    }
    // h = tanh(z) on hidden layers, so dh/dz = 1 - h^2.
    for (std::size_t i = 0; i < in; ++i) next[i] *= 1.0 - h[i] * h[i];
    delta = std::move(next);
  }
}

double mlp_loss(const MlpScoreModel& m, std::span<const TrainingExample> batch, std::vector<double>* grad) {
  if (batch.empty()) throw std::invalid_argument("mlp_loss: empty batch");
  if (grad) grad->assign(m.parameter_count(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    const MlpForward f = mlp_forward(m, ex.x_t, ex.t, ex.c);
    Vec d(f.eps.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double r = f.eps[i] - ex.eps[i];
      loss += r * r * inv_n;
      d[i] = 2.0 * r * inv_n;
    }
    if (grad) mlp_backward(m, f.cache, d, *grad);
  }
  return loss;
}

TrainState::TrainState(MlpScoreModel m, double mom)
    : model(std::move(m)), velocity(model.parameter_count(), 0.0), momentum(mom) {}

double mlp_train_step(TrainState& state, std::span<const LabelledPoint> batch, const NoiseSchedule& s, Rng& rng,
                      double lr) {
  if (batch.empty()) throw std::invalid_argument("mlp_train_step: empty batch");
  if (!(lr > 0.0)) throw std::invalid_argument("mlp_train_step: lr must be positive");
  const MlpScoreModel& m = state.model;
  std::uniform_int_distribution<int> pick_t(1, s.T());
  std::bernoulli_distribution drop(m.p_uncond);

  std::vector<TrainingExample> examples;
  examples.reserve(batch.size());
  for (const auto& p : batch) {
    TrainingExample ex{{}, pick_t(rng), p.c, standard_normal(rng, m.data_dim)};
    if (m.p_uncond > 0.0 && drop(rng)) ex.c = ConditionLabel::null();
    ex.x_t = forward_marginal(s, p.x0, ex.t, ex.eps);
    examples.push_back(std::move(ex));
  }

  std::vector<double> grad;
  const double loss = mlp_loss(m, examples, &grad);
  if (!std::isfinite(loss))
    throw TrainingDiverged("non-finite training loss at step " + std::to_string(state.steps_taken) +
                           " (lr=" + std::to_string(lr) + ")");

  std::vector<double> p = m.flat_parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.velocity[i] = state.momentum * state.velocity[i] - lr * grad[i];
    p[i] += state.velocity[i];
  }
  state.model.set_flat_parameters(p);
  ++state.steps_taken;
  return loss;
}

MlpField::MlpField(std::shared_ptr<const MlpScoreModel> model, NoiseSchedule schedule)
    : model_(std::move(model)), schedule_(std::move(schedule)) {
  if (!model_) throw std::invalid_argument("MlpField: null model");
}

Vec MlpField::score_at(std::span<const double> x, int t, ConditionLabel c) const {
  const MlpForward f = mlp_forward(*model_, x, t, c);
  return score_from_eps(f.eps, schedule_, t);
}

nlohmann::json MlpField::describe() const {
  return {{"kind", "mlp"}, {"widths", model_->widths}, {"seed", model_->seed}, {"p_uncond", model_->p_uncond}};
}

}  // namespace gaplab
