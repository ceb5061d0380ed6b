#include "dutd/controller.hpp"

#include <algorithm>
#include <cmath>

namespace dutd {

namespace {

// Absorbs the rounding error of summing 1/iutd so that integer ratios emit an
// update exactly every iutd steps.
constexpr double kCreditTolerance = 1e-9;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void DutdConfig::validate() const {
  if (!positive_finite(iutd_min)) throw InvalidConfig("iutd_min", "must be a positive real");
  if (!positive_finite(iutd_max)) throw InvalidConfig("iutd_max", "must be a positive real");
  if (iutd_min > iutd_max) throw InvalidConfig("iutd_min", "must not exceed iutd_max");
  // An initial ratio outside the bounds is clamped by the controller, not rejected.
  if (!positive_finite(initial_iutd)) {
    throw InvalidConfig("initial_iutd", "must be a positive real");
  }
  if (!(std::isfinite(increment_c) && increment_c > 1.0)) {
    throw InvalidConfig("increment_c", "must be greater than 1");
  }
  if (eval_interval_k <= 0) throw InvalidConfig("eval_interval_k", "must be positive");
  if (collect_interval_d <= 0) throw InvalidConfig("collect_interval_d", "must be positive");
  if (collect_count_s <= 0) throw InvalidConfig("collect_count_s", "must be positive");
  if (early_phase_steps < 0) throw InvalidConfig("early_phase_steps", "must be non-negative");
  if (eval_interval_k >= collect_interval_d) {
    throw InvalidConfig("eval_interval_k", "must be smaller than collect_interval_d");
  }
}

DutdConfig DutdConfig::control_suite_preset() { return DutdConfig{}; }

DutdConfig DutdConfig::atari_preset() {
  DutdConfig cfg;
  cfg.initial_iutd = 16.0;
  cfg.iutd_max = 32.0;
  return cfg;
}

const char* to_string(Regime r) noexcept {
  switch (r) {
    case Regime::underfitting: return "underfitting";
    case Regime::overfitting: return "overfitting";
    case Regime::none: break;
  }
  return "none";
}

double clamp(double x, double lo, double hi) {
  if (lo > hi) throw InvalidConfig("clamp", "lower bound exceeds upper bound");
  return std::min(hi, std::max(lo, x));
}

DutdController::DutdController(DutdConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  state_.iutd_ratio = clamp(cfg_.initial_iutd, cfg_.iutd_min, cfg_.iutd_max);
}

std::int64_t DutdController::effective_collect_interval() const noexcept {
  if (state_.env_step <= cfg_.early_phase_steps) {
    return std::max<std::int64_t>(1, cfg_.collect_interval_d / 2);
  }
  return cfg_.collect_interval_d;
}

StepEvents DutdController::tick() {
  ++state_.env_step;
  StepEvents ev;
  ev.collect_validation = state_.env_step % effective_collect_interval() == 0;
  ev.evaluate = state_.env_step % cfg_.eval_interval_k == 0;

  state_.update_credit += 1.0 / state_.iutd_ratio;
  const double due = std::floor(state_.update_credit + kCreditTolerance);
  ev.train_steps_due = static_cast<std::int64_t>(due);
  state_.update_credit = std::max(0.0, state_.update_credit - due);
  return ev;
}

void DutdController::register_validation_collection(std::int64_t count) {
  if (count > 0) state_.env_step += count;
}

AdjustmentOutcome DutdController::record_validation_loss(double loss) {
  if (!std::isfinite(loss) || loss < 0.0) {
    throw EvaluationError("validation loss must be finite and non-negative");
  }
  AdjustmentOutcome out{state_.iutd_ratio, state_.iutd_ratio, Regime::none};
  if (state_.previous_loss) {
    out.direction = loss < *state_.previous_loss ? Regime::underfitting : Regime::overfitting;
    if (cfg_.adaptive) {
      const double scaled = out.direction == Regime::underfitting
                                ? state_.iutd_ratio / cfg_.increment_c
                                : state_.iutd_ratio * cfg_.increment_c;
      state_.iutd_ratio = clamp(scaled, cfg_.iutd_min, cfg_.iutd_max);
    }
  }
  state_.previous_loss = loss;
  out.new_iutd = state_.iutd_ratio;
  return out;
}

}  // namespace dutd
