#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "gaplab/mixture.hpp"
#include "gaplab/rng.hpp"
#include "gaplab/schedule.hpp"
#include "gaplab/score.hpp"

namespace gaplab {

/// Fully connected tanh network predicting the forward-process noise.
///
/// Input encoding is x, then sin/cos of t at `frequencies` geometric
/// frequencies, then a one-hot condition with a trailing slot for the null
/// label. The output layer is linear with the data dimension.
struct MlpScoreModel {
  std::size_t data_dim = 0;
  int num_classes = 0;
  int frequencies = 16;
  std::uint64_t seed = 0;
  double p_uncond = 0.1;
  std::vector<std::size_t> widths;      // input, hidden..., output
  std::vector<std::vector<double>> weights;  // layer l: widths[l+1] x widths[l], row-major
  std::vector<Vec> biases;

  std::size_t input_dim() const { return widths.front(); }
  std::size_t layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Parameters in layer order: W0, b0, W1, b1, ...
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> p);

  bool operator==(const MlpScoreModel&) const = default;
};

std::size_t mlp_input_dim(std::size_t data_dim, int num_classes, int frequencies);

/// Xavier-uniform hidden layers; the output layer starts at zero unless
/// `zero_output_layer` is false.
MlpScoreModel make_mlp(std::size_t data_dim, int num_classes, const std::vector<std::size_t>& hidden,
                       std::uint64_t seed, bool zero_output_layer = true, int frequencies = 16);

Vec encode_input(const MlpScoreModel& m, std::span<const double> x, int t, ConditionLabel c);

struct MlpActivations {
  std::vector<Vec> layer_outputs;  // [0] is the encoded input, back() the prediction
};

struct MlpForward {
  Vec eps;
  MlpActivations cache;
};

MlpForward mlp_forward(const MlpScoreModel& m, std::span<const double> x, int t, ConditionLabel c);

/// Backpropagates dLoss/dOutput through a cached forward pass and accumulates
/// into `grad` (flat layout of flat_parameters()).
void mlp_backward(const MlpScoreModel& m, const MlpActivations& cache, std::span<const double> d_output,
                  std::span<double> grad);

struct TrainingExample {
  Vec x_t;
  int t;
  ConditionLabel c;
  Vec eps;
};

/// Mean over examples of ||eps_theta(x_t, t, c) - eps||^2, with its gradient.
double mlp_loss(const MlpScoreModel& m, std::span<const TrainingExample> batch, std::vector<double>* grad = nullptr);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainState {
  MlpScoreModel model;
  std::vector<double> velocity;
  double momentum = 0.9;
  std::uint64_t steps_taken = 0;

  explicit TrainState(MlpScoreModel m, double momentum = 0.9);
};

struct LabelledPoint {
  Vec x0;
  ConditionLabel c;
};

/// One SGD-with-momentum step on the eps-prediction objective. Each example
/// gets t ~ U{1..T} and eps ~ N(0, I), and its label is replaced by the null
/// condition with probability p_uncond. Returns the batch loss before the
/// update. Throws TrainingDiverged on a non-finite loss.
double mlp_train_step(TrainState& state, std::span<const LabelledPoint> batch, const NoiseSchedule& s, Rng& rng,
                      double lr);

/// Score field backed by a trained model.
class MlpField final : public ScoreField {
 public:
  MlpField(std::shared_ptr<const MlpScoreModel> model, NoiseSchedule schedule);

  std::size_t dim() const override { return model_->data_dim; }
  Vec score_at(std::span<const double> x, int t, ConditionLabel c) const override;
  bool has_null_condition() const override { return true; }
  nlohmann::json describe() const override;

  const MlpScoreModel& model() const { return *model_; }

 private:
  std::shared_ptr<const MlpScoreModel> model_;
  NoiseSchedule schedule_;
};

}  // namespace gaplab
