// dutd: run, sweep, report, calibrate and selftest entry points.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dutd/commands.hpp"
#include "dutd/kernels.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Dynamic update-to-data ratio experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::int64_t workers = 0;
  double fixed_iutd = 0.0;
  bool dutd_flag = false;
  std::int64_t total_steps = 0;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "Output directory (default: config output_dir under $DUTD_OUTPUT_ROOT)");
    cmd->add_option("--seeds", seeds, "Override the seed list");
    cmd->add_option("--workers", workers, "Concurrent runs (0 = available parallelism)");
    cmd->add_option("--total-steps", total_steps, "Override experiment.total_env_steps");
  };

  auto* run = app.add_subcommand("run", "Run one experiment config for each seed");
  run->add_option("--config", config_path, "Experiment YAML")->required();
  add_run_flags(run);
  auto* fixed_opt = run->add_option("--fixed-iutd", fixed_iutd, "Fixed-IUTD baseline at this ratio");
  run->add_flag("--dutd", dutd_flag, "Force adaptive DUTD mode")->excludes(fixed_opt);

  std::string sweep_path;
  auto* sweep = app.add_subcommand("sweep", "Run every cell of a sweep spec");
  sweep->add_option("--config", sweep_path, "Sweep YAML")->required();
  add_run_flags(sweep);

  std::string results_dir;
  std::string refs_path;
  std::size_t bootstrap = 2000;
  double alpha = 0.05;
  std::uint64_t report_seed = 0;
  auto* report = app.add_subcommand("report", "Aggregate run results");
  report->add_option("results", results_dir, "Run directory or sweep root")->required();
  report->add_option("--out", out, "Report directory (default <results>/report)");
  report->add_option("--refs", refs_path, "Reference scores from `calibrate` for normalisation");
  report->add_option("--bootstrap", bootstrap, "Bootstrap resamples")->check(CLI::PositiveNumber);
  report->add_option("--alpha", alpha, "CI level is 1 - alpha")->check(CLI::Range(0.0, 1.0));
  report->add_option("--seed", report_seed, "Bootstrap seed");

  dutd::CalibrateOptions cal;
  std::string cal_out = cal.out.string();
  auto* calibrate = app.add_subcommand("calibrate", "Estimate random and oracle reference returns");
  calibrate->add_option("--env", cal.env, "Environment name")->required();
  calibrate->add_option("--episodes", cal.episodes, "Episodes per policy");
  calibrate->add_option("--seed", cal.seed, "Seed");
  calibrate->add_option("--out", cal_out, "Reference JSON (merged if present)");

  auto* selftest = app.add_subcommand("selftest", "Controller oracle and gradient checks");

  CLI11_PARSE(app, argc, argv);

  std::cerr << "kernels: " << dutd::kernels::name(dutd::kernels::active().backend) << '\n';

  dutd::RunOverrides ov;
  if (!out.empty()) ov.out = out;
  if (!seeds.empty()) ov.seeds = seeds;
  if (workers > 0) ov.workers = workers;
  if (total_steps > 0) ov.total_steps = total_steps;
  if (*fixed_opt) ov.fixed_iutd = fixed_iutd;
  ov.dutd = dutd_flag;

  if (*run) return dutd::cmd_run(config_path, ov, std::cout);
  if (*sweep) return dutd::cmd_sweep(sweep_path, ov, std::cout);
  if (*report) {
    dutd::ReportOptions ro;
    if (!out.empty()) ro.out = out;
    if (!refs_path.empty()) ro.refs = refs_path;
    ro.num_bootstrap = bootstrap;
    ro.alpha = alpha;
    ro.seed = report_seed;
    return dutd::cmd_report(results_dir, ro, std::cout);
  }
  if (*calibrate) {
    cal.out = cal_out;
    return dutd::cmd_calibrate(cal, std::cout);
  }
  if (*selftest) return dutd::cmd_selftest(std::cout);
  return 1;
}
