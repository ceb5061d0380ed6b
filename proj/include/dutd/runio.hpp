#pragma once

// On-disk run results. Layout and columns are a versioned interface; see
// docs/formats.md.
//
//   <dir>/<seed>.csv    env_step,return_mean,iutd_ratio,val_loss,train_loss,cum_train_steps
//   <dir>/<seed>.json   run metadata sidecar

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dutd/config.hpp"
#include "dutd/testbed.hpp"

namespace dutd {

inline constexpr int kRunFormatVersion = 1;
inline constexpr const char* kRunCsvHeader =
    "env_step,return_mean,iutd_ratio,val_loss,train_loss,cum_train_steps";

class RunFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_double(double v);

void write_run_csv(std::ostream& out, const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_run_csv(std::istream& in, const std::string& origin = "csv");

nlohmann::json run_metadata(const RunLog& log, const ExperimentConfig& cfg, double wall_time_s);

/// Writes <dir>/<seed>.csv and <dir>/<seed>.json, creating dir.
void write_run_files(const std::filesystem::path& dir, const RunLog& log,
                     const ExperimentConfig& cfg, double wall_time_s);

struct LoadedRun {
  std::uint64_t seed = 0;
  std::string task;
  std::string algorithm;
  nlohmann::json metadata;
  std::vector<CheckpointRecord> records;
};

/// Every <seed>.csv in dir with its sidecar, ordered by seed.
std::vector<LoadedRun> load_run_dir(const std::filesystem::path& dir);

}  // namespace dutd
