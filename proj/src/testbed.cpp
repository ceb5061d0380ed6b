#include "dutd/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

namespace dutd {

// ---------------------------------------------------------------------------
// Environments

EnvStep Environment::expected_step(std::span<const double> state,
                                   std::span<const double> action) const {
  Rng rng(0);
  return step(state, action, rng);
}

PendulumEnv::PendulumEnv(PendulumParams p) : p_(p) {
  if (!(p_.dt > 0.0) || !(p_.mass > 0.0) || !(p_.length > 0.0) || !(p_.max_torque > 0.0) ||
      !(p_.max_speed > 0.0) || p_.horizon <= 0 || p_.process_noise_std < 0.0) {
    throw ConfigError("pendulum: physical parameters must be positive");
  }
}

double PendulumEnv::wrap_angle(double th) {
  const double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(th + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  return w - std::numbers::pi;
}

double PendulumEnv::reward(double th, double omega, double torque) {
  const double a = wrap_angle(th);
  return -(a * a + 0.1 * omega * omega + 0.001 * torque * torque);
}

std::vector<double> PendulumEnv::reset(Rng& rng) const {
  const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double omega = rng.uniform(-1.0, 1.0);
  return {std::cos(th), std::sin(th), omega};
}

EnvStep PendulumEnv::advance(std::span<const double> state, double torque, double noise) const {
  const double th = std::atan2(state[1], state[0]);
  const double omega = state[2];
  const double u = std::clamp(torque, -p_.max_torque, p_.max_torque);
  const double r = reward(th, omega, u);
  const double accel = 3.0 * p_.gravity / (2.0 * p_.length) * std::sin(th) +
                       3.0 / (p_.mass * p_.length * p_.length) * u;
  const double new_omega = std::clamp(omega + accel * p_.dt + noise, -p_.max_speed, p_.max_speed);
  const double new_th = wrap_angle(th + new_omega * p_.dt);
  return {{std::cos(new_th), std::sin(new_th), new_omega}, r, false};
}

EnvStep PendulumEnv::step(std::span<const double> state, std::span<const double> action,
                          Rng& rng) const {
  const double noise = p_.process_noise_std > 0.0 ? rng.normal(0.0, p_.process_noise_std) : 0.0;
  return advance(state, action[0], noise);
}

EnvStep PendulumEnv::expected_step(std::span<const double> state,
                                   std::span<const double> action) const {
  return advance(state, action[0], 0.0);
}

std::unique_ptr<Environment> make_environment(const std::string& name, const PendulumParams& p) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>(p);
  if (name == "zero_reward") return std::make_unique<ConstantRewardEnv>(0.0, p.horizon);
  throw ConfigError("unknown environment: " + name);
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
  return make_environment(cfg.task, cfg.pendulum);
}

void EnvDynamics::predict_batch(std::span<const double> states, std::span<const double> actions,
                                std::size_t n, std::span<double> next_states,
                                std::span<double> rewards) const {
  const std::size_t sd = env_.state_dim();
  const std::size_t ad = env_.action_dim();
  for (std::size_t r = 0; r < n; ++r) {
    const EnvStep s = env_.expected_step(states.subspan(r * sd, sd), actions.subspan(r * ad, ad));
    std::copy(s.next_state.begin(), s.next_state.end(), next_states.begin() + r * sd);
    rewards[r] = s.reward;
  }
}

double episode_return(const Environment& env, const Policy& policy, Rng& rng) {
  std::vector<double> state = env.reset(rng);
  double total = 0.0;
  for (std::int64_t t = 0; t < env.horizon(); ++t) {
    const std::vector<double> action = policy(state, rng);
    EnvStep s = env.step(state, action, rng);
    total += s.reward;
    if (s.terminal) break;
    state = std::move(s.next_state);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Planner

std::size_t best_candidate(const DynamicsModel& model, std::span<const double> state,
                           std::span<const double> sequences, std::size_t n,
                           std::size_t horizon) {
  const std::size_t sd = model.state_dim();
  const std::size_t ad = model.action_dim();
  if (n == 0 || horizon == 0 || sequences.size() != n * horizon * ad || state.size() != sd) {
    throw ModelError("best_candidate: inconsistent candidate buffer");
  }
  std::vector<double> states(n * sd);
  for (std::size_t c = 0; c < n; ++c) std::copy(state.begin(), state.end(), states.begin() + c * sd);
  std::vector<double> next(n * sd);
  std::vector<double> actions(n * ad);
  std::vector<double> rewards(n);
  std::vector<double> returns(n, 0.0);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t c = 0; c < n; ++c) {
      std::copy_n(sequences.begin() + (c * horizon + h) * ad, ad, actions.begin() + c * ad);
    }
    model.predict_batch(states, actions, n, next, rewards);
    for (std::size_t c = 0; c < n; ++c) returns[c] += rewards[c];
    states.swap(next);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (returns[c] > returns[best]) best = c;
  }
  return best;
}

std::vector<double> plan_action(const DynamicsModel& model, std::span<const double> state,
                                const PlannerConfig& planner, Rng& rng, ActionBounds bounds) {
  if (planner.horizon < 1 || planner.n_candidates < 1) {
    throw ConfigError("planner horizon and n_candidates must be at least 1");
  }
  const auto n = static_cast<std::size_t>(planner.n_candidates);
  const auto horizon = static_cast<std::size_t>(planner.horizon);
  const std::size_t ad = model.action_dim();
  std::vector<double> seqs(n * horizon * ad);
  for (double& a : seqs) a = rng.uniform(bounds.low, bounds.high);
  const std::size_t best = best_candidate(model, state, seqs, n, horizon);
  const auto first = seqs.begin() + static_cast<std::ptrdiff_t>(best * horizon * ad);
  return {first, first + static_cast<std::ptrdiff_t>(ad)};
}

// ---------------------------------------------------------------------------
// Drifting stream

DriftingStreamTask::DriftingStreamTask(StreamParams p, std::uint64_t seed)
    : p_(std::move(p)),
      teacher_(static_cast<std::size_t>(p_.state_dim), static_cast<std::size_t>(p_.action_dim),
               std::vector<std::size_t>(p_.teacher_hidden.begin(), p_.teacher_hidden.end()),
               derive_seed(seed, "stream-teacher")) {
  for (double& w : teacher_.parameters()) w *= p_.teacher_scale;
  Rng rng(derive_seed(seed, "stream-direction"));
  direction_.resize(static_cast<std::size_t>(p_.state_dim + p_.action_dim));
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& d : direction_) d = rng.normal();
    norm = std::sqrt(std::inner_product(direction_.begin(), direction_.end(), direction_.begin(), 0.0));
  }
  for (double& d : direction_) d /= norm;
}

std::vector<double> DriftingStreamTask::input_mean(std::int64_t step) const {
  std::vector<double> mu(direction_.size());
  const double shift = p_.drift_rate * static_cast<double>(step);
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = shift * direction_[i];
  return mu;
}

Transition DriftingStreamTask::sample(std::int64_t step, Rng& rng, bool noisy) const {
  const auto sd = static_cast<std::size_t>(p_.state_dim);
  const std::vector<double> mu = input_mean(step);
  Transition t;
  t.state.resize(sd);
  t.action.resize(mu.size() - sd);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double x = rng.normal(mu[i], p_.input_std);
    if (i < sd) {
      t.state[i] = x;
    } else {
      t.action[i - sd] = x;
    }
  }
  Prediction y = teacher_.predict(t.state, t.action);
  if (noisy) {
    for (double& v : y.next_state) v += rng.normal(0.0, p_.noise_std);
    y.reward += rng.normal(0.0, p_.noise_std);
  }
  t.next_state = std::move(y.next_state);
  t.reward = y.reward;
  return t;
}

// ---------------------------------------------------------------------------
// Experiment loop

bool CheckpointRecord::operator==(const CheckpointRecord& o) const {
  auto same = [](double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
  };
  return env_step == o.env_step && same(return_mean, o.return_mean) &&
         same(iutd_ratio, o.iutd_ratio) && same(val_loss, o.val_loss) &&
         same(train_loss, o.train_loss) && cum_train_steps == o.cum_train_steps;
}

namespace {

/// Task-specific half of the loop.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  /// One interaction step; returns the transitions destined for training.
  virtual std::vector<Transition> interact(const MlpWorldModel& model, std::int64_t step,
                                           double progress) = 0;
  /// `count` held-out transitions.
  virtual std::vector<Transition> collect_validation(const MlpWorldModel& model,
                                                     std::int64_t step, std::int64_t count) = 0;
  virtual double checkpoint_score(const MlpWorldModel& model, std::int64_t step,
                                  std::size_t checkpoint_index) = 0;
};

class EnvSource final : public DataSource {
 public:
  EnvSource(const ExperimentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        seed_(seed),
        env_(make_environment(cfg)),
        env_rng_(derive_seed(seed, "env")),
        policy_rng_(derive_seed(seed, "policy")),
        val_rng_(derive_seed(seed, "validation")) {
    state_ = env_->reset(env_rng_);
  }

  std::size_t state_dim() const override { return env_->state_dim(); }
  std::size_t action_dim() const override { return env_->action_dim(); }

  std::vector<Transition> interact(const MlpWorldModel& model, std::int64_t,
                                   double progress) override {
    const double frac = cfg_.exploration.noise_start +
                        (cfg_.exploration.noise_end - cfg_.exploration.noise_start) * progress;
    noise_frac_ = frac;
    Transition t = act(model, state_, frac, policy_rng_, env_rng_);
    ++episode_t_;
    if (t.terminal || episode_t_ >= env_->horizon()) {
      state_ = env_->reset(env_rng_);
      episode_t_ = 0;
    } else {
      state_ = t.next_state;
    }
    return {std::move(t)};
  }

  std::vector<Transition> collect_validation(const MlpWorldModel& model, std::int64_t,
                                             std::int64_t count) override {
    const double frac = cfg_.exploration.validation_noise ? noise_frac_ : 0.0;
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(count));
    std::vector<double> s = env_->reset(val_rng_);
    std::int64_t t = 0;
    while (static_cast<std::int64_t>(out.size()) < count) {
      Transition tr = act(model, s, frac, val_rng_, val_rng_);
      ++t;
      if (tr.terminal || t >= env_->horizon()) {
        s = env_->reset(val_rng_);
        t = 0;
      } else {
        s = tr.next_state;
      }
      out.push_back(std::move(tr));
    }
    return out;
  }

  double checkpoint_score(const MlpWorldModel& model, std::int64_t,
                          std::size_t checkpoint_index) override {
    const ActionBounds bounds = env_->action_bounds();
    const Policy greedy = [&](std::span<const double> s, Rng& rng) {
      return plan_action(model, s, cfg_.planner, rng, bounds);
    };
    double total = 0.0;
    for (std::int64_t e = 0; e < cfg_.eval_episodes; ++e) {
      Rng rng(derive_seed(seed_, "eval", checkpoint_index * 1000 + static_cast<std::uint64_t>(e)));
      total += episode_return(*env_, greedy, rng);
    }
    return total / static_cast<double>(cfg_.eval_episodes);
  }

 private:
  Transition act(const MlpWorldModel& model, std::span<const double> s, double noise_frac,
                 Rng& policy_rng, Rng& env_rng) {
    const ActionBounds b = env_->action_bounds();
    std::vector<double> a = plan_action(model, s, cfg_.planner, policy_rng, b);
    const double stddev = noise_frac * (b.high - b.low);
    if (stddev > 0.0) {
      for (double& x : a) x = std::clamp(x + policy_rng.normal(0.0, stddev), b.low, b.high);
    }
    EnvStep step = env_->step(s, a, env_rng);
    Transition t;
    t.state.assign(s.begin(), s.end());
    t.action = std::move(a);
    t.reward = step.reward;
    t.next_state = std::move(step.next_state);
    t.terminal = step.terminal;
    return t;
  }

  const ExperimentConfig& cfg_;
  std::uint64_t seed_;
  std::unique_ptr<Environment> env_;
  Rng env_rng_;
  Rng policy_rng_;
  Rng val_rng_;
  std::vector<double> state_;
  std::int64_t episode_t_ = 0;
  double noise_frac_ = 0.0;
};

class StreamSource final : public DataSource {
 public:
  StreamSource(const ExperimentConfig& cfg, std::uint64_t seed)
      : task_(cfg.stream, seed),
        seed_(seed),
        stream_rng_(derive_seed(seed, "stream")),
        val_rng_(derive_seed(seed, "validation")) {}

  std::size_t state_dim() const override { return static_cast<std::size_t>(task_.params().state_dim); }
  std::size_t action_dim() const override { return static_cast<std::size_t>(task_.params().action_dim); }

  std::vector<Transition> interact(const MlpWorldModel&, std::int64_t step, double) override {
    std::vector<Transition> out;
    const auto& p = task_.params();
    for (std::int64_t i = 0; i < p.samples_per_step; ++i) {
      if (p.max_samples > 0 && emitted_ >= p.max_samples) break;
      out.push_back(task_.sample(step, stream_rng_));
      ++emitted_;
    }
    return out;
  }

  std::vector<Transition> collect_validation(const MlpWorldModel&, std::int64_t step,
                                             std::int64_t count) override {
    std::vector<Transition> out;
    for (std::int64_t i = 0; i < count; ++i) out.push_back(task_.sample(step, val_rng_));
    return out;
  }

  double checkpoint_score(const MlpWorldModel& model, std::int64_t step,
                          std::size_t checkpoint_index) override {
    Rng rng(derive_seed(seed_, "test", checkpoint_index));
    std::vector<Transition> test;
    for (std::int64_t i = 0; i < task_.params().test_samples; ++i) {
      test.push_back(task_.sample(step, rng, /*noisy=*/false));
    }
    return -model.loss(test).value;
  }

 private:
  DriftingStreamTask task_;
  std::uint64_t seed_;
  Rng stream_rng_;
  Rng val_rng_;
  std::int64_t emitted_ = 0;
};

RunLog run_loop(const ExperimentConfig& cfg, std::uint64_t seed, DataSource& source,
                RunOptions opts) {
  cfg.validate();
  RunLog log;
  log.seed = seed;
  log.config_hash = config_hash(cfg);
  log.algorithm = cfg.algorithm();
  log.task = cfg.task;

  DutdController controller(cfg.dutd);
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
  ValidationBuffer validation(static_cast<std::size_t>(cfg.validation_capacity));
  MlpWorldModel model(source.state_dim(), source.action_dim(),
                      {cfg.learner.hidden_sizes.begin(), cfg.learner.hidden_sizes.end()},
                      derive_seed(seed, "model"));
  Rng replay_rng(derive_seed(seed, "replay"));
  std::uint64_t next_id = 1;

  auto collect = [&](std::int64_t step) {
    auto batch = source.collect_validation(model, step, cfg.dutd.collect_count_s);
    for (Transition& t : batch) {
      t.sequence_id = next_id++;
      if (opts.record_ids) log.validation_ids.push_back(t.sequence_id);
      validation.push(std::move(t));
    }
    controller.register_validation_collection(cfg.dutd.collect_count_s);
    log.validation_transitions += cfg.dutd.collect_count_s;
    ++log.validation_collections;
  };

  double train_loss_sum = 0.0;
  std::int64_t train_loss_count = 0;
  std::size_t checkpoint_index = 0;
  std::int64_t next_checkpoint = cfg.checkpoint_interval;

  auto emit_checkpoint = [&]() {
    CheckpointRecord rec;
    rec.env_step = controller.env_step();
    rec.return_mean = source.checkpoint_score(model, controller.env_step(), checkpoint_index++);
    rec.iutd_ratio = controller.iutd_ratio();
    if (!validation.empty()) rec.val_loss = model.evaluate(validation.validation_pass()).value;
    if (train_loss_count > 0) rec.train_loss = train_loss_sum / static_cast<double>(train_loss_count);
    rec.cum_train_steps = log.train_steps;
    log.records.push_back(rec);
    train_loss_sum = 0.0;
    train_loss_count = 0;
    while (next_checkpoint <= controller.env_step()) next_checkpoint += cfg.checkpoint_interval;
  };

  if (cfg.bootstrap_validation) collect(0);

  for (std::int64_t i = 1; i <= cfg.total_env_steps && !log.diverged; ++i) {
    const double progress =
        cfg.total_env_steps > 1 ? static_cast<double>(i - 1) / static_cast<double>(cfg.total_env_steps - 1) : 0.0;
    for (Transition& t : source.interact(model, controller.env_step() + 1, progress)) {
      t.sequence_id = next_id++;
      if (opts.record_ids) log.replay_ids.push_back(t.sequence_id);
      replay.push(std::move(t));
    }
    ++log.interaction_steps;
    const std::int64_t step_at_tick = controller.env_step() + 1;
    const StepEvents ev = controller.tick();

    if (ev.collect_validation) collect(step_at_tick);

    for (std::int64_t u = 0; u < ev.train_steps_due && !replay.empty(); ++u) {
      const auto batch = replay.sample_batch(static_cast<std::size_t>(cfg.learner.batch_size), replay_rng);
      try {
        train_loss_sum += model.train_step(batch, cfg.learner.learning_rate);
        ++train_loss_count;
        ++log.train_steps;
      } catch (const DivergenceError& e) {
        log.diverged = true;
        log.failure = e.what();
        break;
      }
    }
    if (log.diverged) break;

    if (ev.evaluate && !validation.empty()) {
      const double loss = model.evaluate(validation.validation_pass()).value;
      EvaluationRecord rec;
      rec.env_step = step_at_tick;
      rec.val_loss = loss;
      rec.outcome = controller.record_validation_loss(loss);
      log.evaluations.push_back(rec);
    }

    if (controller.env_step() >= next_checkpoint) emit_checkpoint();
  }

  if (log.records.empty() || log.records.back().env_step != controller.env_step()) {
    emit_checkpoint();
  }
  log.final_env_step = controller.env_step();
  return log;
}

}  // namespace

RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, RunOptions opts) {
  if (cfg.task == "stream") throw ConfigError("run_experiment requires an environment task");
  EnvSource source(cfg, seed);
  return run_loop(cfg, seed, source, opts);
}

RunLog run_supervised_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                                 RunOptions opts) {
  if (cfg.task != "stream") throw ConfigError("run_supervised_experiment requires task: stream");
  StreamSource source(cfg, seed);
  return run_loop(cfg, seed, source, opts);
}

RunLog run_task(const ExperimentConfig& cfg, std::uint64_t seed, RunOptions opts) {
  return cfg.task == "stream" ? run_supervised_experiment(cfg, seed, opts)
                              : run_experiment(cfg, seed, opts);
}

}  // namespace dutd
