#include "dutd/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "dutd/controller.hpp"
#include "dutd/evalmetrics.hpp"
#include "dutd/learner.hpp"
#include "dutd/rng.hpp"
#include "dutd/runio.hpp"
#include "dutd/testbed.hpp"

namespace dutd {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_overrides(ExperimentConfig& cfg, const RunOverrides& ov) {
  if (ov.seeds) cfg.seeds = *ov.seeds;
  if (ov.total_steps) cfg.total_env_steps = *ov.total_steps;
  if (ov.fixed_iutd) {
    apply_fixed_iutd(cfg, *ov.fixed_iutd);
  } else if (ov.dutd) {
    cfg.dutd.adaptive = true;
  }
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<fs::path>& out) {
  if (out) return *out;
  fs::path dir = cfg.output_dir.empty() ? fs::path("runs") : fs::path(cfg.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) dir = fs::path(root) / dir;
  }
  return dir;
}

void run_parallel(std::size_t count, std::int64_t workers,
                  const std::function<void(std::size_t)>& task) {
  std::size_t n = workers > 0 ? static_cast<std::size_t>(workers)
                              : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, count);
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
}

namespace {

struct RunJob {
  const ExperimentConfig* cfg;
  std::uint64_t seed;
  fs::path dir;
  std::string label;
};

struct JobResult {
  bool ok = false;
  bool diverged = false;
  std::string message;
};

JobResult execute(const RunJob& job) {
  JobResult r;
  try {
    const auto start = std::chrono::steady_clock::now();
    const RunLog log = run_task(*job.cfg, job.seed);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run_files(job.dir, log, *job.cfg, wall);
    r.ok = !log.diverged;
    r.diverged = log.diverged;
    r.message = log.diverged ? "diverged: " + log.failure : "ok";
  } catch (const std::exception& e) {
    r.message = e.what();
  }
  return r;
}

int run_jobs(const std::vector<RunJob>& jobs, std::int64_t workers, std::ostream& log) {
  std::vector<JobResult> results(jobs.size());
  std::mutex log_mu;
  run_parallel(jobs.size(), workers, [&](std::size_t i) {
    results[i] = execute(jobs[i]);
    std::lock_guard lock(log_mu);
    log << "[" << jobs[i].label << " seed " << jobs[i].seed << "] " << results[i].message << '\n';
  });
  const auto failed = std::count_if(results.begin(), results.end(),
                                    [](const JobResult& r) { return !r.ok; });
  if (failed) log << failed << " of " << jobs.size() << " runs failed\n";
  return failed ? 1 : 0;
}

}  // namespace

int cmd_run(const fs::path& config_path, const RunOverrides& ov, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(config_path);
    apply_overrides(cfg, ov);
    cfg.validate();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  const fs::path dir = resolve_output_dir(cfg, ov.out);
  std::vector<RunJob> jobs;
  for (std::uint64_t seed : cfg.seeds) jobs.push_back({&cfg, seed, dir, cfg.algorithm()});
  return run_jobs(jobs, ov.workers.value_or(0), log);
}

int cmd_sweep(const fs::path& sweep_path, const RunOverrides& ov, std::ostream& log) {
  SweepSpec spec;
  std::vector<SweepCell> cells;
  try {
    spec = load_sweep_spec(sweep_path);
    apply_overrides(spec.base, RunOverrides{ov.seeds, std::nullopt, false, ov.total_steps, {}, {}});
    cells = expand_sweep(spec);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  const fs::path root = resolve_output_dir(spec.base, ov.out);
  fs::create_directories(root);

  json manifest;
  manifest["format_version"] = kRunFormatVersion;
  manifest["axis"] = to_string(spec.axis);
  manifest["values"] = spec.values;
  for (const auto& c : cells) {
    manifest["cells"][c.tag] = {{"adaptive", c.config.dutd.adaptive},
                                {"initial_iutd", c.config.dutd.initial_iutd},
                                {"increment_c", c.config.dutd.increment_c},
                                {"learning_rate", c.config.learner.learning_rate},
                                {"config_hash", config_hash(c.config)}};
  }
  std::ofstream(root / "sweep.json") << manifest.dump(2) << '\n';

  std::vector<RunJob> jobs;
  for (const auto& c : cells) {
    for (std::uint64_t seed : c.config.seeds) jobs.push_back({&c.config, seed, root / c.tag, c.tag});
  }
  log << "sweep: " << cells.size() << " cells, " << jobs.size() << " runs -> " << root.string() << '\n';
  return run_jobs(jobs, ov.workers.value_or(spec.workers), log);
}

namespace {

struct CellData {
  std::string tag;
  std::vector<LoadedRun> runs;
};

json summary_json(const MetricSummary& s) {
  return {{"point", s.point}, {"ci_low", s.ci.lo}, {"ci_high", s.ci.hi}};
}

/// Score transform for one task: identity, or normalisation against refs.
double transform(const json& refs, const std::string& task, double value) {
  if (refs.is_null()) return value;
  const json& r = refs.at(task);
  return normalized_score(value, r.at("random_ref").get<double>(), r.at("oracle_ref").get<double>());
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

json report_cell(const CellData& cell, const json& refs, const ReportOptions& opts,
                 const fs::path& out_dir) {
  if (cell.runs.empty()) throw RunFormatError("no runs");
  const auto& grid_runs = cell.runs;
  for (const auto& r : grid_runs) {
    if (r.records.empty()) throw RunFormatError("run " + std::to_string(r.seed) + " has no records");
  }

  // Final scores -> matrix (ragged task groups are rejected by ScoreMatrix).
  std::vector<ScoreSeries> series;
  for (const auto& r : grid_runs) {
    ScoreSeries s{r.task, {}, {}};
    for (const auto& rec : r.records) {
      s.steps.push_back(rec.env_step);
      s.values.push_back(transform(refs, r.task, rec.return_mean));
    }
    series.push_back(std::move(s));
  }
  std::map<std::string, std::vector<double>> finals;
  for (const auto& s : series) finals[s.task].push_back(s.values.back());
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (auto& [k, v] : finals) {
    names.push_back(k);
    cols.push_back(v);
  }
  const ScoreMatrix matrix(names, cols);
  const AggregateReport agg = aggregate_report(matrix, opts.num_bootstrap, opts.alpha, opts.seed);

  json j;
  j["num_runs"] = grid_runs.size();
  j["tasks"] = names;
  j["algorithm"] = grid_runs.front().algorithm;
  for (Metric m : kAllMetrics) j[to_string(m)] = summary_json(agg.get(m));

  // Checkpoint grid of the first run; other runs are carried forward onto it.
  std::vector<std::int64_t> grid;
  for (const auto& rec : grid_runs.front().records) grid.push_back(rec.env_step);

  Rng rng(derive_seed(opts.seed, "sample-efficiency"));
  const auto curve = sample_efficiency_curve(series, Metric::iqm, grid, opts.num_bootstrap, opts.alpha, rng);
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : curve) {
    rows.push_back({std::to_string(p.step), format_double(p.point), format_double(p.lo), format_double(p.hi)});
  }
  write_csv(out_dir / ("sample_efficiency_" + cell.tag + ".csv"), "env_step,iqm,ci_low,ci_high", rows);

  // Mean and population std across seeds at each grid step.
  auto band = [&](auto value_of) {
    std::vector<std::vector<std::string>> out;
    for (std::int64_t step : grid) {
      std::vector<double> xs;
      for (const auto& r : grid_runs) {
        ScoreSeries s{r.task, {}, {}};
        for (const auto& rec : r.records) {
          s.steps.push_back(rec.env_step);
          s.values.push_back(value_of(r, rec));
        }
        const double v = value_at(s, step);
        if (std::isfinite(v)) xs.push_back(v);
      }
      if (xs.empty()) continue;
      const double mu = mean(xs);
      double var = 0.0;
      for (double x : xs) var += (x - mu) * (x - mu);
      var /= static_cast<double>(xs.size());
      out.push_back({std::to_string(step), format_double(mu), format_double(std::sqrt(var)),
                     std::to_string(xs.size())});
    }
    return out;
  };
  write_csv(out_dir / ("iutd_" + cell.tag + ".csv"), "env_step,iutd_mean,iutd_std,n",
            band([](const LoadedRun&, const CheckpointRecord& rec) { return rec.iutd_ratio; }));
  write_csv(out_dir / ("curve_" + cell.tag + ".csv"), "env_step,return_mean,return_std,n",
            band([&](const LoadedRun& r, const CheckpointRecord& rec) {
              return transform(refs, r.task, rec.return_mean);
            }));

  double iutd_sum = 0.0;
  std::size_t iutd_n = 0;
  for (const auto& r : grid_runs) {
    for (const auto& rec : r.records) {
      iutd_sum += rec.iutd_ratio;
      ++iutd_n;
    }
  }
  j["mean_iutd"] = iutd_sum / static_cast<double>(iutd_n);
  return j;
}

}  // namespace

int cmd_report(const fs::path& results_dir, const ReportOptions& opts, std::ostream& log) {
  if (!fs::is_directory(results_dir)) {
    log << "error: not a directory: " << results_dir.string() << '\n';
    return 2;
  }
  json refs;
  if (opts.refs) {
    std::ifstream in(*opts.refs);
    if (!in) {
      log << "error: cannot open reference file " << opts.refs->string() << '\n';
      return 2;
    }
    refs = json::parse(in, nullptr, false);
    if (refs.is_discarded()) {
      log << "error: malformed reference file " << opts.refs->string() << '\n';
      return 2;
    }
    refs.erase("format_version");
  }

  auto has_csv = [](const fs::path& d) {
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && e.path().extension() == ".csv") return true;
    }
    return false;
  };
  std::vector<fs::path> cell_dirs;
  if (has_csv(results_dir)) {
    cell_dirs.push_back(results_dir);
  } else {
    for (const auto& e : fs::directory_iterator(results_dir)) {
      if (e.is_directory() && e.path().filename() != "report" && has_csv(e.path())) {
        cell_dirs.push_back(e.path());
      }
    }
  }
  std::sort(cell_dirs.begin(), cell_dirs.end());
  if (cell_dirs.empty()) {
    log << "error: no run files under " << results_dir.string() << '\n';
    return 1;
  }

  const fs::path out_dir = opts.out.value_or(results_dir / "report");
  fs::create_directories(out_dir);
  json report;
  report["format_version"] = kRunFormatVersion;
  report["num_bootstrap"] = opts.num_bootstrap;
  report["alpha"] = opts.alpha;
  report["normalized"] = !refs.is_null();
  report["cells"] = json::object();
  int status = 0;
  for (const auto& dir : cell_dirs) {
    const std::string tag = fs::weakly_canonical(dir).filename().string();
    try {
      CellData cell{tag, load_run_dir(dir)};
      report["cells"][tag] = report_cell(cell, refs, opts, out_dir);
    } catch (const std::exception& e) {
      report["errors"][tag] = e.what();
      log << "error in cell " << tag << ": " << e.what() << '\n';
      status = 1;
    }
  }
  std::ofstream(out_dir / "report.json", std::ios::binary) << report.dump(2) << '\n';
  log << "report: " << cell_dirs.size() << " cells -> " << (out_dir / "report.json").string() << '\n';
  return status;
}

int cmd_calibrate(const CalibrateOptions& opts, std::ostream& log) {
  std::unique_ptr<Environment> env;
  try {
    env = make_environment(opts.env);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  if (opts.episodes < 1) {
    log << "error: episodes must be at least 1\n";
    return 2;
  }
  const ActionBounds b = env->action_bounds();
  const Policy random_policy = [&](std::span<const double>, Rng& rng) {
    std::vector<double> a(env->action_dim());
    for (double& x : a) x = rng.uniform(b.low, b.high);
    return a;
  };
  const EnvDynamics truth(*env);
  const Policy oracle_policy = [&](std::span<const double> s, Rng& rng) {
    return plan_action(truth, s, opts.planner, rng, b);
  };
  double random_total = 0.0;
  double oracle_total = 0.0;
  for (std::int64_t e = 0; e < opts.episodes; ++e) {
    // Both policies start from the same initial states.
    Rng r1(derive_seed(opts.seed, "calibrate", static_cast<std::uint64_t>(e)));
    Rng r2(derive_seed(opts.seed, "calibrate", static_cast<std::uint64_t>(e)));
    random_total += episode_return(*env, random_policy, r1);
    oracle_total += episode_return(*env, oracle_policy, r2);
  }
  const double random_ref = random_total / static_cast<double>(opts.episodes);
  const double oracle_ref = oracle_total / static_cast<double>(opts.episodes);
  const bool degenerate = random_ref == oracle_ref;

  json refs = json::object();
  if (std::ifstream in(opts.out); in) {
    refs = json::parse(in, nullptr, false);
    if (refs.is_discarded() || !refs.is_object()) refs = json::object();
  }
  refs["format_version"] = kRunFormatVersion;
  refs[opts.env] = {{"random_ref", random_ref},
                    {"oracle_ref", oracle_ref},
                    {"episodes", opts.episodes},
                    {"seed", opts.seed},
                    {"degenerate", degenerate}};
  if (!opts.out.parent_path().empty()) fs::create_directories(opts.out.parent_path());
  std::ofstream(opts.out, std::ios::binary) << refs.dump(2) << '\n';
  log << opts.env << ": random_ref=" << random_ref << " oracle_ref=" << oracle_ref << '\n';
  if (degenerate) log << "warning: degenerate references for " << opts.env << " (normalisation undefined)\n";
  return 0;
}

int cmd_selftest(std::ostream& log) {
  bool ok = true;

  // Controller: multiplicative updates vs. an additive log-space replay.
  {
    Rng rng(20240611);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      DutdConfig cfg;
      cfg.increment_c = rng.uniform(1.05, 1.6);
      cfg.initial_iutd = rng.uniform(1.0, 15.0);
      DutdController ctl(cfg);
      double log_iutd = std::log(ctl.iutd_ratio());
      std::optional<double> prev;
      for (int i = 0; i < 200; ++i) {
        const double loss = std::floor(rng.uniform(0.0, 8.0)) / 4.0;
        ctl.record_validation_loss(loss);
        if (prev) {
          log_iutd += loss < *prev ? -std::log(cfg.increment_c) : std::log(cfg.increment_c);
          log_iutd = std::clamp(log_iutd, std::log(cfg.iutd_min), std::log(cfg.iutd_max));
        }
        prev = loss;
        worst = std::max(worst, std::abs(ctl.iutd_ratio() - std::exp(log_iutd)) / std::exp(log_iutd));
      }
    }
    const bool pass = worst < 1e-9;
    ok &= pass;
    log << (pass ? "PASS" : "FAIL") << " controller trajectory oracle (max rel err " << worst << ")\n";
  }

  // Learner: backprop vs. central differences.
  {
    Rng rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      MlpWorldModel model(3, 1, {8, 8}, 100 + trial);
      std::vector<Transition> batch(6);
      for (auto& t : batch) {
        t.state = {rng.normal(), rng.normal(), rng.normal()};
        t.action = {rng.uniform(-2, 2)};
        t.next_state = {rng.normal(), rng.normal(), rng.normal()};
        t.reward = rng.normal();
      }
      worst = std::max(worst, gradient_check(model, batch, 1e-5));
    }
    const bool pass = worst < 1e-4;
    ok &= pass;
    log << (pass ? "PASS" : "FAIL") << " gradient check (max rel err " << worst << ")\n";
  }
  return ok ? 0 : 1;
}

}  // namespace dutd
