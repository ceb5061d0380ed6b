#pragma once

// Experiment and sweep configuration.
//
// Config files are YAML with one section per component:
//
//   task: pendulum            # pendulum | zero_reward | stream
//   pendulum:  {...}          # PendulumParams
//   stream:    {...}          # StreamParams
//   dutd:      {...}          # DutdConfig
//   learner:   {...}
//   planner:   {...}
//   exploration: {...}
//   experiment: {...}
//
// Every key is optional; unknown keys are rejected with their line number.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dutd/controller.hpp"

namespace dutd {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PendulumParams {
  double max_speed = 8.0;
  double max_torque = 2.0;
  double dt = 0.05;
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double process_noise_std = 0.0;
  std::int64_t horizon = 200;

  bool operator==(const PendulumParams&) const = default;
};

/// Supervised regression stream with a drifting input distribution.
struct StreamParams {
  std::int64_t state_dim = 2;
  std::int64_t action_dim = 1;
  std::vector<std::int64_t> teacher_hidden{16};
  /// Multiplier applied to the teacher's initial weights.
  double teacher_scale = 2.0;
  /// Input-mean displacement per environment step, along a fixed unit direction.
  double drift_rate = 1e-4;
  double input_std = 1.0;
  double noise_std = 0.3;
  std::int64_t samples_per_step = 1;
  /// Stop emitting training samples after this many (0 = never).
  std::int64_t max_samples = 0;
  /// Size of the fresh test sample scored at each checkpoint.
  std::int64_t test_samples = 1000;

  bool operator==(const StreamParams&) const = default;
};

struct LearnerConfig {
  std::vector<std::int64_t> hidden_sizes{32, 32};
  double learning_rate = 3e-3;
  std::int64_t batch_size = 64;

  bool operator==(const LearnerConfig&) const = default;
};

struct PlannerConfig {
  std::int64_t horizon = 10;
  std::int64_t n_candidates = 64;

  bool operator==(const PlannerConfig&) const = default;
};

struct ExplorationConfig {
  /// Gaussian action noise std as a fraction of the action range, annealed
  /// linearly from start to end over the run.
  double noise_start = 0.1;
  double noise_end = 0.01;
  /// Validation episodes use the same noisy policy when true.
  bool validation_noise = true;

  bool operator==(const ExplorationConfig&) const = default;
};

struct ExperimentConfig {
  std::string task = "pendulum";
  PendulumParams pendulum;
  StreamParams stream;
  DutdConfig dutd;
  LearnerConfig learner;
  PlannerConfig planner;
  ExplorationConfig exploration;

  std::int64_t total_env_steps = 50000;
  std::int64_t checkpoint_interval = 1000;
  std::int64_t eval_episodes = 5;
  std::int64_t replay_capacity = 1'000'000;
  std::int64_t validation_capacity = 10'000;
  bool bootstrap_validation = true;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";

  /// "dutd" or "fixed_iutd".
  std::string algorithm() const { return dutd.adaptive ? "dutd" : "fixed_iutd"; }

  /// Throws ConfigError (or InvalidConfig for the dutd section).
  void validate() const;

  bool operator==(const ExperimentConfig& o) const;
};

ExperimentConfig parse_experiment_config(const std::string& yaml_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string to_yaml(const ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical YAML form.
std::string config_hash(const ExperimentConfig& cfg);

/// Switch to the fixed-IUTD baseline at `iutd`, widening the bounds to include it.
void apply_fixed_iutd(ExperimentConfig& cfg, double iutd);

enum class SweepAxis { fixed_iutd, learning_rate, increment_c };

struct SweepSpec {
  ExperimentConfig base;
  SweepAxis axis = SweepAxis::fixed_iutd;
  std::vector<double> values;
  /// fixed_iutd axis: add one DUTD cell. learning_rate axis: run each value
  /// with and without DUTD (fixed cells use the base initial_iutd).
  bool include_dutd = true;
  std::int64_t budget = 1000;  // max cells x seeds
  std::int64_t workers = 0;    // 0 = available parallelism
};

struct SweepCell {
  std::string tag;
  ExperimentConfig config;
};

SweepSpec parse_sweep_spec(const std::string& yaml_text,
                           const std::filesystem::path& base_dir = {});
SweepSpec load_sweep_spec(const std::filesystem::path& path);
std::vector<SweepCell> expand_sweep(const SweepSpec& spec);
const char* to_string(SweepAxis a) noexcept;

}  // namespace dutd
