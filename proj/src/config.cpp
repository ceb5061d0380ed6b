#include "dutd/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dutd/rng.hpp"

namespace dutd {

namespace {

std::string where(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  if (m.is_null()) return "";
  return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ": ";
}

template <class T>
T convert(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(n) + "invalid value for '" + field + "'");
  }
}

/// A mapping whose keys are consumed one by one; leftovers are errors.
class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsMap()) throw ConfigError(where(node_) + "section '" + name_ + "' must be a mapping");
  }

  template <class T>
  void read(const char* key, T& out) {
    if (!node_) return;
    const YAML::Node v = node_[key];
    seen_.insert(key);
    if (!v) return;
    const std::string field = name_.empty() ? key : name_ + "." + key;
    if constexpr (std::is_same_v<T, std::vector<std::int64_t>> ||
                  std::is_same_v<T, std::vector<std::uint64_t>> ||
                  std::is_same_v<T, std::vector<double>>) {
      if (!v.IsSequence()) throw ConfigError(where(v) + "'" + field + "' must be a list");
      out.clear();
      for (const auto& item : v) out.push_back(convert<typename T::value_type>(item, field));
    } else {
      out = convert<T>(v, field);
    }
  }

  YAML::Node child(const char* key) {
    seen_.insert(key);
    return node_ ? node_[key] : YAML::Node();
  }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) {
        throw ConfigError(where(kv.first) + "unknown key '" + key + "'" +
                          (name_.empty() ? std::string() : " in section '" + name_ + "'"));
      }
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_experiment(const YAML::Node& root, ExperimentConfig& cfg) {
  if (!root.IsMap()) throw ConfigError(where(root) + "config must be a mapping");
  Section top(root, "");
  top.read("task", cfg.task);

  Section pend(top.child("pendulum"), "pendulum");
  auto& p = cfg.pendulum;
  pend.read("max_speed", p.max_speed);
  pend.read("max_torque", p.max_torque);
  pend.read("dt", p.dt);
  pend.read("gravity", p.gravity);
  pend.read("mass", p.mass);
  pend.read("length", p.length);
  pend.read("process_noise_std", p.process_noise_std);
  pend.read("horizon", p.horizon);
  pend.finish();

  Section stream(top.child("stream"), "stream");
  auto& s = cfg.stream;
  stream.read("state_dim", s.state_dim);
  stream.read("action_dim", s.action_dim);
  stream.read("teacher_hidden", s.teacher_hidden);
  stream.read("teacher_scale", s.teacher_scale);
  stream.read("drift_rate", s.drift_rate);
  stream.read("input_std", s.input_std);
  stream.read("noise_std", s.noise_std);
  stream.read("samples_per_step", s.samples_per_step);
  stream.read("max_samples", s.max_samples);
  stream.read("test_samples", s.test_samples);
  stream.finish();

  Section dutd(top.child("dutd"), "dutd");
  auto& d = cfg.dutd;
  dutd.read("initial_iutd", d.initial_iutd);
  dutd.read("iutd_min", d.iutd_min);
  dutd.read("iutd_max", d.iutd_max);
  dutd.read("increment_c", d.increment_c);
  dutd.read("eval_interval_k", d.eval_interval_k);
  dutd.read("collect_interval_d", d.collect_interval_d);
  dutd.read("collect_count_s", d.collect_count_s);
  dutd.read("early_phase_steps", d.early_phase_steps);
  dutd.read("adaptive", d.adaptive);
  dutd.finish();

  Section learner(top.child("learner"), "learner");
  learner.read("hidden_sizes", cfg.learner.hidden_sizes);
  learner.read("learning_rate", cfg.learner.learning_rate);
  learner.read("batch_size", cfg.learner.batch_size);
  learner.finish();

  Section planner(top.child("planner"), "planner");
  planner.read("horizon", cfg.planner.horizon);
  planner.read("n_candidates", cfg.planner.n_candidates);
  planner.finish();

  Section expl(top.child("exploration"), "exploration");
  expl.read("noise_start", cfg.exploration.noise_start);
  expl.read("noise_end", cfg.exploration.noise_end);
  expl.read("validation_noise", cfg.exploration.validation_noise);
  expl.finish();

  Section exp(top.child("experiment"), "experiment");
  exp.read("total_env_steps", cfg.total_env_steps);
  exp.read("checkpoint_interval", cfg.checkpoint_interval);
  exp.read("eval_episodes", cfg.eval_episodes);
  exp.read("replay_capacity", cfg.replay_capacity);
  exp.read("validation_capacity", cfg.validation_capacity);
  exp.read("bootstrap_validation", cfg.bootstrap_validation);
  exp.read("seeds", cfg.seeds);
  exp.read("output_dir", cfg.output_dir);
  exp.finish();

  top.finish();
}

YAML::Node parse_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ", column " +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  // Keep reals recognisable as reals when read back by other tools.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <class T>
std::string list(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

std::string boolean(bool b) { return b ? "true" : "false"; }

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

std::string tag_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(task == "pendulum" || task == "zero_reward" || task == "stream", "task",
          "unknown task '" + task + "' (expected pendulum, zero_reward or stream)");
  dutd.validate();
  for (auto h : learner.hidden_sizes) require(h > 0, "learner.hidden_sizes", "entries must be positive");
  require(std::isfinite(learner.learning_rate) && learner.learning_rate > 0.0,
          "learner.learning_rate", "must be positive");
  require(learner.batch_size > 0, "learner.batch_size", "must be positive");
  require(planner.horizon >= 1, "planner.horizon", "must be at least 1");
  require(planner.n_candidates >= 1, "planner.n_candidates", "must be at least 1");
  require(exploration.noise_start >= 0.0 && exploration.noise_end >= 0.0, "exploration",
          "noise fractions must be non-negative");
  require(total_env_steps > 0, "experiment.total_env_steps", "must be positive");
  require(checkpoint_interval > 0, "experiment.checkpoint_interval", "must be positive");
  require(eval_episodes >= 1, "experiment.eval_episodes", "must be at least 1");
  require(replay_capacity > 0, "experiment.replay_capacity", "must be positive");
  require(validation_capacity > 0, "experiment.validation_capacity", "must be positive");
  require(!seeds.empty(), "experiment.seeds", "must not be empty");
  require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
          "experiment.seeds", "must be distinct");
  require(pendulum.horizon > 0, "pendulum.horizon", "must be positive");
  require(stream.state_dim > 0 && stream.action_dim > 0, "stream", "dimensions must be positive");
  for (auto h : stream.teacher_hidden) require(h > 0, "stream.teacher_hidden", "entries must be positive");
  require(stream.input_std >= 0.0 && stream.noise_std >= 0.0, "stream", "std values must be non-negative");
  require(stream.samples_per_step >= 1, "stream.samples_per_step", "must be at least 1");
  require(stream.max_samples >= 0, "stream.max_samples", "must be non-negative");
  require(stream.test_samples >= 1, "stream.test_samples", "must be at least 1");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return task == o.task && pendulum == o.pendulum && stream == o.stream && dutd == o.dutd &&
         learner == o.learner && planner == o.planner && exploration == o.exploration &&
         total_env_steps == o.total_env_steps && checkpoint_interval == o.checkpoint_interval &&
         eval_episodes == o.eval_episodes && replay_capacity == o.replay_capacity &&
         validation_capacity == o.validation_capacity &&
         bootstrap_validation == o.bootstrap_validation && seeds == o.seeds &&
         output_dir == o.output_dir;
}

ExperimentConfig parse_experiment_config(const std::string& yaml_text) {
  ExperimentConfig cfg;
  const YAML::Node root = parse_yaml(yaml_text);
  if (root.IsNull()) return cfg;
  read_experiment(root, cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return parse_experiment_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_yaml(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "task: " << c.task << "\n";
  o << "pendulum:\n"
    << "  max_speed: " << num(c.pendulum.max_speed) << "\n"
    << "  max_torque: " << num(c.pendulum.max_torque) << "\n"
    << "  dt: " << num(c.pendulum.dt) << "\n"
    << "  gravity: " << num(c.pendulum.gravity) << "\n"
    << "  mass: " << num(c.pendulum.mass) << "\n"
    << "  length: " << num(c.pendulum.length) << "\n"
    << "  process_noise_std: " << num(c.pendulum.process_noise_std) << "\n"
    << "  horizon: " << c.pendulum.horizon << "\n";
  o << "stream:\n"
    << "  state_dim: " << c.stream.state_dim << "\n"
    << "  action_dim: " << c.stream.action_dim << "\n"
    << "  teacher_hidden: " << list(c.stream.teacher_hidden) << "\n"
    << "  teacher_scale: " << num(c.stream.teacher_scale) << "\n"
    << "  drift_rate: " << num(c.stream.drift_rate) << "\n"
    << "  input_std: " << num(c.stream.input_std) << "\n"
    << "  noise_std: " << num(c.stream.noise_std) << "\n"
    << "  samples_per_step: " << c.stream.samples_per_step << "\n"
    << "  max_samples: " << c.stream.max_samples << "\n"
    << "  test_samples: " << c.stream.test_samples << "\n";
  o << "dutd:\n"
    << "  initial_iutd: " << num(c.dutd.initial_iutd) << "\n"
    << "  iutd_min: " << num(c.dutd.iutd_min) << "\n"
    << "  iutd_max: " << num(c.dutd.iutd_max) << "\n"
    << "  increment_c: " << num(c.dutd.increment_c) << "\n"
    << "  eval_interval_k: " << c.dutd.eval_interval_k << "\n"
    << "  collect_interval_d: " << c.dutd.collect_interval_d << "\n"
    << "  collect_count_s: " << c.dutd.collect_count_s << "\n"
    << "  early_phase_steps: " << c.dutd.early_phase_steps << "\n"
    << "  adaptive: " << boolean(c.dutd.adaptive) << "\n";
  o << "learner:\n"
    << "  hidden_sizes: " << list(c.learner.hidden_sizes) << "\n"
    << "  learning_rate: " << num(c.learner.learning_rate) << "\n"
    << "  batch_size: " << c.learner.batch_size << "\n";
  o << "planner:\n"
    << "  horizon: " << c.planner.horizon << "\n"
    << "  n_candidates: " << c.planner.n_candidates << "\n";
  o << "exploration:\n"
    << "  noise_start: " << num(c.exploration.noise_start) << "\n"
    << "  noise_end: " << num(c.exploration.noise_end) << "\n"
    << "  validation_noise: " << boolean(c.exploration.validation_noise) << "\n";
  o << "experiment:\n"
    << "  total_env_steps: " << c.total_env_steps << "\n"
    << "  checkpoint_interval: " << c.checkpoint_interval << "\n"
    << "  eval_episodes: " << c.eval_episodes << "\n"
    << "  replay_capacity: " << c.replay_capacity << "\n"
    << "  validation_capacity: " << c.validation_capacity << "\n"
    << "  bootstrap_validation: " << boolean(c.bootstrap_validation) << "\n"
    << "  seeds: " << list(c.seeds) << "\n"
    << "  output_dir: " << quoted(c.output_dir) << "\n";
  return o.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Seeds and output location do not change what a single run computes.
  ExperimentConfig canonical = cfg;
  canonical.seeds = {0};
  canonical.output_dir.clear();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_yaml(canonical))));
  return buf;
}

void apply_fixed_iutd(ExperimentConfig& cfg, double iutd) {
  if (!(std::isfinite(iutd) && iutd > 0.0)) throw ConfigError("fixed iutd must be positive");
  cfg.dutd.adaptive = false;
  cfg.dutd.initial_iutd = iutd;
  cfg.dutd.iutd_min = std::min(cfg.dutd.iutd_min, iutd);
  cfg.dutd.iutd_max = std::max(cfg.dutd.iutd_max, iutd);
}

const char* to_string(SweepAxis a) noexcept {
  switch (a) {
    case SweepAxis::fixed_iutd: return "fixed_iutd";
    case SweepAxis::learning_rate: return "learning_rate";
    case SweepAxis::increment_c: return "increment_c";
  }
  return "?";
}

SweepSpec parse_sweep_spec(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  const YAML::Node root = parse_yaml(yaml_text);
  if (!root.IsMap()) throw ConfigError("sweep spec must be a mapping");
  SweepSpec spec;
  Section top(root, "");
  const YAML::Node base = top.child("base");
  if (!base) throw ConfigError("sweep spec requires 'base'");
  if (base.IsScalar()) {
    std::filesystem::path p = base.as<std::string>();
    if (p.is_relative()) p = base_dir / p;
    spec.base = load_experiment_config(p);
  } else {
    read_experiment(base, spec.base);
  }
  std::string axis;
  top.read("axis", axis);
  if (axis == "fixed_iutd") {
    spec.axis = SweepAxis::fixed_iutd;
  } else if (axis == "learning_rate") {
    spec.axis = SweepAxis::learning_rate;
  } else if (axis == "increment_c") {
    spec.axis = SweepAxis::increment_c;
  } else {
    throw ConfigError(where(root["axis"]) + "axis must be fixed_iutd, learning_rate or increment_c");
  }
  top.read("values", spec.values);
  top.read("include_dutd", spec.include_dutd);
  top.read("budget", spec.budget);
  top.read("workers", spec.workers);
  top.finish();

  if (spec.values.empty()) throw ConfigError("sweep values must not be empty");
  for (double v : spec.values) {
    if (!(std::isfinite(v) && v > 0.0)) throw ConfigError("sweep values must be positive");
  }
  if (spec.workers < 0) throw ConfigError("workers must be non-negative");
  spec.base.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  try {
    return parse_sweep_spec(read_file(path), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<SweepCell> expand_sweep(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  switch (spec.axis) {
    case SweepAxis::fixed_iutd:
      for (double v : spec.values) {
        SweepCell c{"iutd_" + tag_number(v), spec.base};
        apply_fixed_iutd(c.config, v);
        cells.push_back(std::move(c));
      }
      if (spec.include_dutd) {
        SweepCell c{"dutd", spec.base};
        c.config.dutd.adaptive = true;
        cells.push_back(std::move(c));
      }
      break;
    case SweepAxis::learning_rate:
      for (double v : spec.values) {
        SweepCell fixed{"lr_" + tag_number(v) + "_fixed", spec.base};
        fixed.config.learner.learning_rate = v;
        fixed.config.dutd.adaptive = false;
        cells.push_back(std::move(fixed));
        if (spec.include_dutd) {
          SweepCell dyn{"lr_" + tag_number(v) + "_dutd", spec.base};
          dyn.config.learner.learning_rate = v;
          dyn.config.dutd.adaptive = true;
          cells.push_back(std::move(dyn));
        }
      }
      break;
    case SweepAxis::increment_c:
      for (double v : spec.values) {
        SweepCell c{"dutd_c" + tag_number(v), spec.base};
        c.config.dutd.adaptive = true;
        c.config.dutd.increment_c = v;
        cells.push_back(std::move(c));
      }
      break;
  }
  const auto runs = static_cast<std::int64_t>(cells.size() * spec.base.seeds.size());
  if (runs > spec.budget) {
    throw ConfigError("sweep needs " + std::to_string(runs) + " runs, budget is " +
                      std::to_string(spec.budget));
  }
  for (const auto& c : cells) c.config.validate();
  return cells;
}

}  // namespace dutd
