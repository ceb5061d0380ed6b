#pragma once

// Desk-scale model-based RL testbed: environments, a random-shooting planner,
// a drifting supervised stream, and the experiment loops that drive the
// controller, buffers and world model together.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dutd/config.hpp"
#include "dutd/controller.hpp"
#include "dutd/experience.hpp"
#include "dutd/learner.hpp"
#include "dutd/rng.hpp"

namespace dutd {

struct EnvStep {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;
};

struct ActionBounds {
  double low = -1.0;
  double high = 1.0;
};

/// Stateless environment: the state lives with the caller.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual ActionBounds action_bounds() const = 0;
  virtual std::int64_t horizon() const = 0;
  virtual std::vector<double> reset(Rng& rng) const = 0;
  virtual EnvStep step(std::span<const double> state, std::span<const double> action,
                       Rng& rng) const = 0;
  /// Noise-free transition used by the true-dynamics planner.
  virtual EnvStep expected_step(std::span<const double> state,
                                std::span<const double> action) const;
};

/// Torque-limited pendulum. Observation [cos th, sin th, omega]; th = 0 is upright.
/// reward = -(th^2 + 0.1 omega^2 + 0.001 a^2) with th wrapped to [-pi, pi].
class PendulumEnv final : public Environment {
 public:
  explicit PendulumEnv(PendulumParams p = {});
  std::string name() const override { return "pendulum"; }
  std::size_t state_dim() const override { return 3; }
  std::size_t action_dim() const override { return 1; }
  ActionBounds action_bounds() const override { return {-p_.max_torque, p_.max_torque}; }
  std::int64_t horizon() const override { return p_.horizon; }
  std::vector<double> reset(Rng& rng) const override;
  EnvStep step(std::span<const double> state, std::span<const double> action,
               Rng& rng) const override;
  EnvStep expected_step(std::span<const double> state,
                        std::span<const double> action) const override;

  static double wrap_angle(double th);
  static double reward(double th, double omega, double torque);

 private:
  EnvStep advance(std::span<const double> state, double torque, double noise) const;
  PendulumParams p_;
};

/// Single-state environment paying a constant reward every step.
class ConstantRewardEnv final : public Environment {
 public:
  ConstantRewardEnv(double reward, std::int64_t horizon) : reward_(reward), horizon_(horizon) {}
  std::string name() const override { return reward_ == 0.0 ? "zero_reward" : "constant_reward"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  ActionBounds action_bounds() const override { return {-1.0, 1.0}; }
  std::int64_t horizon() const override { return horizon_; }
  std::vector<double> reset(Rng&) const override { return {0.0}; }
  EnvStep step(std::span<const double> state, std::span<const double>, Rng&) const override {
    return {{state.begin(), state.end()}, reward_, false};
  }

 private:
  double reward_;
  std::int64_t horizon_;
};

/// Known environments: "pendulum", "zero_reward". Throws ConfigError otherwise.
std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg);
std::unique_ptr<Environment> make_environment(const std::string& name,
                                              const PendulumParams& p = {});

/// Exposes an environment's noise-free dynamics as a planner model.
class EnvDynamics final : public DynamicsModel {
 public:
  explicit EnvDynamics(const Environment& env) : env_(env) {}
  std::size_t state_dim() const override { return env_.state_dim(); }
  std::size_t action_dim() const override { return env_.action_dim(); }
  void predict_batch(std::span<const double> states, std::span<const double> actions,
                     std::size_t n, std::span<double> next_states,
                     std::span<double> rewards) const override;

 private:
  const Environment& env_;
};

using Policy = std::function<std::vector<double>(std::span<const double> state, Rng& rng)>;

/// Undiscounted return of one episode, truncated at the horizon.
double episode_return(const Environment& env, const Policy& policy, Rng& rng);

/// Index of the candidate with the highest predicted cumulative reward; ties
/// go to the lowest index. `sequences` is n x horizon x action_dim.
std::size_t best_candidate(const DynamicsModel& model, std::span<const double> state,
                           std::span<const double> sequences, std::size_t n,
                           std::size_t horizon);

/// Random shooting: first action of the best of n uniformly sampled sequences.
std::vector<double> plan_action(const DynamicsModel& model, std::span<const double> state,
                                const PlannerConfig& planner, Rng& rng, ActionBounds bounds);

/// Regression stream: inputs x ~ N(mu(t), input_std^2 I) with mu(t) moving
/// along a fixed unit direction, targets from a fixed random teacher network
/// plus Gaussian noise. Samples are packed as transitions (the first
/// state_dim inputs as state, the rest as action; teacher outputs as
/// next_state and reward).
class DriftingStreamTask {
 public:
  DriftingStreamTask(StreamParams p, std::uint64_t seed);

  Transition sample(std::int64_t step, Rng& rng, bool noisy = true) const;
  std::vector<double> input_mean(std::int64_t step) const;
  const MlpWorldModel& teacher() const noexcept { return teacher_; }
  const StreamParams& params() const noexcept { return p_; }

 private:
  StreamParams p_;
  MlpWorldModel teacher_;
  std::vector<double> direction_;
};

struct CheckpointRecord {
  std::int64_t env_step = 0;
  double return_mean = 0.0;
  double iutd_ratio = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  std::int64_t cum_train_steps = 0;

  bool operator==(const CheckpointRecord& o) const;
};

struct EvaluationRecord {
  std::int64_t env_step = 0;
  double val_loss = 0.0;
  AdjustmentOutcome outcome;
};

struct RunLog {
  std::vector<CheckpointRecord> records;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string algorithm;
  std::string task;
  bool diverged = false;
  std::string failure;

  // Run statistics; not part of the CSV.
  std::int64_t interaction_steps = 0;
  std::int64_t validation_transitions = 0;
  std::int64_t validation_collections = 0;
  std::int64_t train_steps = 0;
  std::int64_t final_env_step = 0;
  std::vector<EvaluationRecord> evaluations;
  /// Sequence-id ranges are recorded so tests can audit buffer disjointness.
  std::vector<std::uint64_t> replay_ids;
  std::vector<std::uint64_t> validation_ids;
};

struct RunOptions {
  /// Keep every transition id in the log (tests only; memory grows with T).
  bool record_ids = false;
};

/// Model-based RL loop on an environment task.
RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, RunOptions opts = {});

/// Same event loop on the drifting stream; return_mean holds the negated
/// noise-free test error on fresh samples from the current input distribution.
RunLog run_supervised_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                 RunOptions opts = {});

/// Dispatches on cfg.task.
RunLog run_task(const ExperimentConfig& cfg, std::uint64_t seed, RunOptions opts = {});

}  // namespace dutd
