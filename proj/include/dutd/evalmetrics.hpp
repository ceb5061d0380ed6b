#pragma once

// Aggregate performance metrics over runs x tasks with stratified percentile
// bootstrap confidence intervals.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dutd/rng.hpp"

namespace dutd {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (agent - random) / (human - random). Throws MetricsError when the two
/// references coincide.
double normalized_score(double agent, double random_ref, double human_ref);

double mean(std::span<const double> xs);
double median(std::span<const double> xs);
/// Mean after dropping floor(n/4) values from each end of the sorted sample.
double iqm(std::span<const double> xs);
/// Mean shortfall below `threshold`.
double optimality_gap(std::span<const double> xs, double threshold = 1.0);

/// Linear interpolation between order statistics at q in [0, 1] (position q * (n - 1)).
double percentile(std::vector<double> xs, double q);

enum class Metric { mean, median, iqm, optimality_gap };
const char* to_string(Metric m) noexcept;
Metric metric_from_string(const std::string& s);
inline constexpr Metric kAllMetrics[] = {Metric::mean, Metric::median, Metric::iqm,
                                         Metric::optimality_gap};

/// runs x tasks table, stored column-wise so each task's runs are contiguous.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  /// columns[task][run]; every task must have the same number of finite entries.
  ScoreMatrix(std::vector<std::string> tasks, std::vector<std::vector<double>> columns);

  std::size_t num_tasks() const noexcept { return columns_.size(); }
  std::size_t num_runs() const noexcept { return columns_.empty() ? 0 : columns_[0].size(); }
  bool empty() const noexcept { return num_tasks() == 0 || num_runs() == 0; }
  double at(std::size_t run, std::size_t task) const { return columns_.at(task).at(run); }
  std::span<const double> task_scores(std::size_t task) const { return columns_.at(task); }
  const std::vector<std::string>& tasks() const noexcept { return tasks_; }
  /// All entries pooled, task-major.
  std::vector<double> pooled() const;

 private:
  std::vector<std::string> tasks_;
  std::vector<std::vector<double>> columns_;
};

double aggregate(const ScoreMatrix& m, Metric metric);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Calls `visit` with each of the B resampled matrices: for every task,
/// num_runs run indices drawn independently with replacement. Draw order:
/// resample-major, then task, then run.
void stratified_resamples(const ScoreMatrix& m, std::size_t num_bootstrap, Rng& rng,
                          const std::function<void(const ScoreMatrix&)>& visit);

/// Percentile interval (alpha/2, 1 - alpha/2) of the metric over B stratified resamples.
Interval stratified_bootstrap_ci(const ScoreMatrix& m, Metric metric, std::size_t num_bootstrap,
                                 double alpha, Rng& rng);

struct MetricSummary {
  double point = 0.0;
  Interval ci;
};

struct AggregateReport {
  MetricSummary mean, median, iqm, optimality_gap;
  std::size_t num_bootstrap = 0;
  double alpha = 0.05;

  const MetricSummary& get(Metric m) const;
  MetricSummary& get(Metric m);
};

/// All four metrics with CIs. Each metric's resampling uses the same rng
/// stream start so the intervals share resamples.
AggregateReport aggregate_report(const ScoreMatrix& m, std::size_t num_bootstrap, double alpha,
                                 std::uint64_t seed);

/// Scores of one run over time, for a named task.
struct ScoreSeries {
  std::string task;
  std::vector<std::int64_t> steps;
  std::vector<double> values;
};

struct CurvePoint {
  std::int64_t step = 0;
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Value of a series at `step` by last observation carried forward (NaN
/// before the first observation).
double value_at(const ScoreSeries& s, std::int64_t step);

/// Aggregate + CI of the runs' scores at each checkpoint.
std::vector<CurvePoint> sample_efficiency_curve(const std::vector<ScoreSeries>& runs,
                                                Metric metric,
                                                std::span<const std::int64_t> checkpoints,
                                                std::size_t num_bootstrap, double alpha,
                                                Rng& rng);

/// Groups series by task into a rectangular matrix of their values at `step`.
ScoreMatrix score_matrix_at(const std::vector<ScoreSeries>& runs, std::int64_t step);

}  // namespace dutd
