#pragma once

// Implementations of the `dutd` CLI subcommands. Each returns a process exit
// status and writes human-readable progress to `log`.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dutd/config.hpp"

namespace dutd {

/// Environment variable naming the root for relative output directories.
inline constexpr const char* kOutputRootEnv = "DUTD_OUTPUT_ROOT";

struct RunOverrides {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<double> fixed_iutd;
  bool dutd = false;  // force adaptive mode
  std::optional<std::int64_t> total_steps;
  std::optional<std::filesystem::path> out;
  std::optional<std::int64_t> workers;
};

/// Applies overrides to a parsed config (fixed_iutd wins over dutd).
void apply_overrides(ExperimentConfig& cfg, const RunOverrides& ov);

/// Output directory after --out and DUTD_OUTPUT_ROOT resolution.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& out);

/// Runs tasks on up to `workers` threads (0 = hardware concurrency).
void run_parallel(std::size_t count, std::int64_t workers,
                  const std::function<void(std::size_t)>& task);

int cmd_run(const std::filesystem::path& config_path, const RunOverrides& ov, std::ostream& log);

int cmd_sweep(const std::filesystem::path& sweep_path, const RunOverrides& ov, std::ostream& log);

struct ReportOptions {
  std::optional<std::filesystem::path> out;   // default <results>/report
  std::optional<std::filesystem::path> refs;  // calibration file for normalisation
  std::size_t num_bootstrap = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

int cmd_report(const std::filesystem::path& results_dir, const ReportOptions& opts,
               std::ostream& log);

struct CalibrateOptions {
  std::string env = "pendulum";
  std::int64_t episodes = 100;
  std::uint64_t seed = 0;
  std::filesystem::path out = "refs.json";
  PlannerConfig planner{15, 128};
};

int cmd_calibrate(const CalibrateOptions& opts, std::ostream& log);

/// Controller trajectory oracle and gradient checks.
int cmd_selftest(std::ostream& log);

}  // namespace dutd
