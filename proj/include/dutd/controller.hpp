#pragma once

// Dynamic update-to-data ratio controller.
//
// The controller works in terms of the inverted UTD ratio (IUTD): environment
// steps per learner update. After every evaluation on held-out data it
// multiplies the IUTD by `increment_c` when the validation loss did not
// improve (overfitting) and divides it when it improved (underfitting), then
// clamps it to [iutd_min, iutd_max]. Fractional ratios are realised with an
// update-credit accumulator.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace dutd {

/// Thrown when a configuration value violates its documented invariant.
class InvalidConfig : public std::invalid_argument {
 public:
  InvalidConfig(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DutdConfig {
  double initial_iutd = 5.0;
  double iutd_min = 1.0;
  double iutd_max = 15.0;
  double increment_c = 1.3;
  std::int64_t eval_interval_k = 500;
  std::int64_t collect_interval_d = 100000;
  std::int64_t collect_count_s = 3000;
  /// d is halved while env_step <= early_phase_steps.
  std::int64_t early_phase_steps = 0;
  /// false: fixed-IUTD baseline; losses are recorded but never acted on.
  bool adaptive = true;

  /// Throws InvalidConfig naming the first violated field.
  void validate() const;

  /// Continuous-control preset (initial 5, bounds [1, 15]).
  static DutdConfig control_suite_preset();
  /// Discrete-action preset (initial 16, bounds [1, 32]).
  static DutdConfig atari_preset();

  bool operator==(const DutdConfig&) const = default;
};

struct DutdState {
  double iutd_ratio = 0.0;
  std::optional<double> previous_loss;
  double update_credit = 0.0;
  std::int64_t env_step = 0;

  bool operator==(const DutdState&) const = default;
};

struct StepEvents {
  std::int64_t train_steps_due = 0;
  bool collect_validation = false;
  bool evaluate = false;
};

enum class Regime { none, underfitting, overfitting };

const char* to_string(Regime r) noexcept;

struct AdjustmentOutcome {
  double old_iutd = 0.0;
  double new_iutd = 0.0;
  Regime direction = Regime::none;
};

/// min(hi, max(lo, x)); throws InvalidConfig when lo > hi.
double clamp(double x, double lo, double hi);

class DutdController {
 public:
  explicit DutdController(DutdConfig cfg);

  /// Advance one environment step and report what is due at this step.
  StepEvents tick();

  /// Validation transitions count as environment interaction.
  void register_validation_collection(std::int64_t count);

  /// Apply the multiplicative rule. Throws EvaluationError (state untouched)
  /// for a non-finite or negative loss.
  AdjustmentOutcome record_validation_loss(double loss);

  /// Collection interval in effect at the current env_step.
  std::int64_t effective_collect_interval() const noexcept;

  const DutdState& state() const noexcept { return state_; }
  const DutdConfig& config() const noexcept { return cfg_; }
  double iutd_ratio() const noexcept { return state_.iutd_ratio; }
  std::int64_t env_step() const noexcept { return state_.env_step; }

 private:
  DutdConfig cfg_;
  DutdState state_;
};

}  // namespace dutd
