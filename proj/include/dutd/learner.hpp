#pragma once

// Supervised world models scheduled by the controller.
//
// A model maps (state, action) to (next_state, reward). Its loss is the joint
// mean squared error over the next-state coordinates and the reward,
// normalised by (state_dim + 1) and averaged over examples, so values are
// comparable across dataset sizes.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "dutd/experience.hpp"

namespace dutd {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Prediction {
  std::vector<double> next_state;
  double reward = 0.0;
};

struct LossReport {
  double value = 0.0;
  std::size_t num_examples = 0;

  bool operator==(const LossReport&) const = default;
};

/// Anything a planner can roll forward.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;

  /// Row-major batches: states n x state_dim, actions n x action_dim.
  virtual void predict_batch(std::span<const double> states, std::span<const double> actions,
                             std::size_t n, std::span<double> next_states,
                             std::span<double> rewards) const = 0;

  Prediction predict(std::span<const double> state, std::span<const double> action) const;
};

class WorldModel : public DynamicsModel {
 public:
  /// One optimisation step; returns the loss before the step.
  virtual double train_step(std::span<const Transition> batch, double learning_rate) = 0;
  /// Pure and deterministic for fixed parameters and input order.
  virtual LossReport evaluate(std::span<const Transition> data) const = 0;
};

/// Fully connected tanh network with a linear output layer whose first
/// state_dim units form the next-state head and whose last unit is the reward
/// head. Trained with plain full-batch gradient descent.
class MlpWorldModel final : public WorldModel {
 public:
  MlpWorldModel(std::size_t state_dim, std::size_t action_dim,
                std::vector<std::size_t> hidden_sizes, std::uint64_t seed);

  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  const std::vector<std::size_t>& hidden_sizes() const noexcept { return hidden_; }

  void predict_batch(std::span<const double> states, std::span<const double> actions,
                     std::size_t n, std::span<double> next_states,
                     std::span<double> rewards) const override;

  LossReport loss(std::span<const Transition> data) const;
  LossReport evaluate(std::span<const Transition> data) const override { return loss(data); }

  /// Gradient of loss() with respect to parameters(), by backpropagation.
  std::vector<double> gradient(std::span<const Transition> batch) const;

  /// Throws DivergenceError and leaves parameters untouched if the gradient or
  /// the updated parameters are non-finite.
  double train_step(std::span<const Transition> batch, double learning_rate) override;

  /// Flat parameter vector. Per layer: the transposed weight matrix
  /// (fan_in x fan_out, row-major) followed by the bias vector.
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  std::size_t num_layers() const noexcept { return layer_sizes_.size() - 1; }
  /// Input width, hidden widths, output width.
  const std::vector<std::size_t>& layer_sizes() const noexcept { return layer_sizes_; }
  std::span<const double> layer_weights(std::size_t layer) const;
  std::span<const double> layer_bias(std::size_t layer) const;

  void save(std::ostream& out) const;
  static MlpWorldModel load(std::istream& in);

  bool operator==(const MlpWorldModel& o) const {
    return layer_sizes_ == o.layer_sizes_ && state_dim_ == o.state_dim_ && params_ == o.params_;
  }

 private:
  struct Packed;
  Packed pack(std::span<const Transition> data) const;
  // Forward pass over n rows; activations[0] is the input, the last entry the output.
  void forward(const double* inputs, std::size_t n,
               std::vector<std::vector<double>>& activations) const;
  double loss_and_gradient(std::span<const Transition> batch, std::vector<double>* grad) const;

  std::size_t state_dim_;
  std::size_t action_dim_;
  std::vector<std::size_t> hidden_;
  std::vector<std::size_t> layer_sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights in params_
  std::vector<double> params_;
};

/// Max over parameters of |g_fd - g_bp| / max(|g_fd|, |g_bp|, 1e-8), with
/// central differences of step eps in (0, 1e-3]. The differenced loss is
/// recomputed in extended precision by a separate scalar forward pass.
double gradient_check(const MlpWorldModel& model, std::span<const Transition> batch, double eps);

}  // namespace dutd
