#include "dutd/runio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dutd {

namespace {

double parse_double(std::string_view s, const std::string& origin, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw RunFormatError(origin + ":" + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, const std::string& origin, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw RunFormatError(origin + ":" + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_run_csv(std::ostream& out, const std::vector<CheckpointRecord>& records) {
  out << kRunCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.env_step << ',' << format_double(r.return_mean) << ',' << format_double(r.iutd_ratio)
        << ',' << format_double(r.val_loss) << ',' << format_double(r.train_loss) << ','
        << r.cum_train_steps << '\n';
  }
}

std::vector<CheckpointRecord> read_run_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) {
    throw RunFormatError(origin + ": missing or unexpected header");
  }
  std::vector<CheckpointRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 6) {
      throw RunFormatError(origin + ":" + std::to_string(lineno) + ": expected 6 columns");
    }
    CheckpointRecord r;
    r.env_step = parse_int(f[0], origin, lineno);
    r.return_mean = parse_double(f[1], origin, lineno);
    r.iutd_ratio = parse_double(f[2], origin, lineno);
    r.val_loss = parse_double(f[3], origin, lineno);
    r.train_loss = parse_double(f[4], origin, lineno);
    r.cum_train_steps = parse_int(f[5], origin, lineno);
    if (!out.empty() && r.env_step <= out.back().env_step) {
      throw RunFormatError(origin + ":" + std::to_string(lineno) + ": env_step not increasing");
    }
    out.push_back(r);
  }
  return out;
}

nlohmann::json run_metadata(const RunLog& log, const ExperimentConfig& cfg, double wall_time_s) {
  nlohmann::json j;
  j["format_version"] = kRunFormatVersion;
  j["seed"] = log.seed;
  j["task"] = log.task;
  j["algorithm"] = log.algorithm;
  j["adaptive"] = cfg.dutd.adaptive;
  j["initial_iutd"] = cfg.dutd.initial_iutd;
  j["increment_c"] = cfg.dutd.increment_c;
  j["learning_rate"] = cfg.learner.learning_rate;
  j["config_hash"] = log.config_hash;
  j["config_yaml"] = to_yaml(cfg);
  j["diverged"] = log.diverged;
  if (log.diverged) j["failure"] = log.failure;
  j["interaction_steps"] = log.interaction_steps;
  j["validation_transitions"] = log.validation_transitions;
  j["train_steps"] = log.train_steps;
  j["final_env_step"] = log.final_env_step;
  j["wall_time_s"] = wall_time_s;
  return j;
}

void write_run_files(const std::filesystem::path& dir, const RunLog& log,
                     const ExperimentConfig& cfg, double wall_time_s) {
  std::filesystem::create_directories(dir);
  const std::string stem = std::to_string(log.seed);
  {
    std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
    if (!csv) throw RunFormatError("cannot write " + (dir / (stem + ".csv")).string());
    write_run_csv(csv, log.records);
  }
  std::ofstream meta(dir / (stem + ".json"), std::ios::binary);
  if (!meta) throw RunFormatError("cannot write " + (dir / (stem + ".json")).string());
  meta << run_metadata(log, cfg, wall_time_s).dump(2) << '\n';
}

std::vector<LoadedRun> load_run_dir(const std::filesystem::path& dir) {
  std::vector<LoadedRun> runs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const auto csv_path = entry.path();
    auto json_path = csv_path;
    json_path.replace_extension(".json");
    std::ifstream meta(json_path);
    if (!meta) throw RunFormatError("missing metadata sidecar " + json_path.string());
    LoadedRun run;
    try {
      run.metadata = nlohmann::json::parse(meta);
      run.seed = run.metadata.at("seed").get<std::uint64_t>();
      run.task = run.metadata.at("task").get<std::string>();
      run.algorithm = run.metadata.at("algorithm").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw RunFormatError(json_path.string() + ": " + e.what());
    }
    std::ifstream csv(csv_path);
    run.records = read_run_csv(csv, csv_path.string());
    runs.push_back(std::move(run));
  }
  std::sort(runs.begin(), runs.end(),
            [](const LoadedRun& a, const LoadedRun& b) { return a.seed < b.seed; });
  return runs;
}

}  // namespace dutd
