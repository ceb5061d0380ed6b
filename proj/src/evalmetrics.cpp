#include "dutd/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

namespace dutd {

namespace {

void require_nonempty(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw MetricsError(std::string(what) + ": empty input");
}

}  // namespace

double normalized_score(double agent, double random_ref, double human_ref) {
  if (human_ref == random_ref) {
    throw MetricsError("normalized_score: human and random references coincide");
  }
  return (agent - random_ref) / (human_ref - random_ref);
}

double mean(std::span<const double> xs) {
  require_nonempty(xs, "mean");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  require_nonempty(xs, "median");
  return percentile({xs.begin(), xs.end()}, 0.5);
}

double iqm(std::span<const double> xs) {
  require_nonempty(xs, "iqm");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t trim = v.size() / 4;
  return mean(std::span<const double>(v).subspan(trim, v.size() - 2 * trim));
}

double optimality_gap(std::span<const double> xs, double threshold) {
  require_nonempty(xs, "optimality_gap");
  double total = 0.0;
  for (double x : xs) total += threshold - std::min(x, threshold);
  return total / static_cast<double>(xs.size());
}

double percentile(std::vector<double> xs, double q) {
  if (xs.empty()) throw MetricsError("percentile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw MetricsError("percentile: q outside [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

const char* to_string(Metric m) noexcept {
  switch (m) {
    case Metric::mean: return "mean";
    case Metric::median: return "median";
    case Metric::iqm: return "iqm";
    case Metric::optimality_gap: return "optimality_gap";
  }
  return "?";
}

Metric metric_from_string(const std::string& s) {
  for (Metric m : kAllMetrics) {
    if (s == to_string(m)) return m;
  }
  throw MetricsError("unknown metric: " + s);
}

ScoreMatrix::ScoreMatrix(std::vector<std::string> tasks, std::vector<std::vector<double>> columns)
    : tasks_(std::move(tasks)), columns_(std::move(columns)) {
  if (tasks_.size() != columns_.size()) throw MetricsError("ScoreMatrix: task names/columns mismatch");
  for (const auto& c : columns_) {
    if (c.size() != columns_.front().size()) {
      throw MetricsError("ScoreMatrix: tasks must have equal run counts");
    }
    for (double v : c) {
      if (!std::isfinite(v)) throw MetricsError("ScoreMatrix: non-finite score");
    }
  }
}

std::vector<double> ScoreMatrix::pooled() const {
  std::vector<double> out;
  out.reserve(num_tasks() * num_runs());
  for (const auto& c : columns_) out.insert(out.end(), c.begin(), c.end());
  return out;
}

double aggregate(const ScoreMatrix& m, Metric metric) {
  if (m.empty()) throw MetricsError("aggregate: empty score matrix");
  const std::vector<double> all = m.pooled();
  switch (metric) {
    case Metric::mean: return mean(all);
    case Metric::median: return median(all);
    case Metric::iqm: return iqm(all);
    case Metric::optimality_gap: return optimality_gap(all);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void stratified_resamples(const ScoreMatrix& m, std::size_t num_bootstrap, Rng& rng,
                          const std::function<void(const ScoreMatrix&)>& visit) {
  if (m.empty()) throw MetricsError("bootstrap: empty score matrix");
  const std::size_t runs = m.num_runs();
  std::vector<std::vector<double>> cols(m.num_tasks(), std::vector<double>(runs));
  for (std::size_t b = 0; b < num_bootstrap; ++b) {
    for (std::size_t t = 0; t < m.num_tasks(); ++t) {
      const auto src = m.task_scores(t);
      for (std::size_t r = 0; r < runs; ++r) cols[t][r] = src[rng.index(runs)];
    }
    visit(ScoreMatrix(m.tasks(), cols));
  }
}

Interval stratified_bootstrap_ci(const ScoreMatrix& m, Metric metric, std::size_t num_bootstrap,
                                 double alpha, Rng& rng) {
  if (num_bootstrap < 1) throw MetricsError("bootstrap: need at least one resample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw MetricsError("bootstrap: alpha must lie in (0, 1)");
  std::vector<double> stats;
  stats.reserve(num_bootstrap);
  stratified_resamples(m, num_bootstrap, rng,
                       [&](const ScoreMatrix& r) { stats.push_back(aggregate(r, metric)); });
  return {percentile(stats, alpha / 2.0), percentile(stats, 1.0 - alpha / 2.0)};
}

const MetricSummary& AggregateReport::get(Metric m) const {
  switch (m) {
    case Metric::mean: return mean;
    case Metric::median: return median;
    case Metric::iqm: return iqm;
    case Metric::optimality_gap: break;
  }
  return optimality_gap;
}

MetricSummary& AggregateReport::get(Metric m) {
  return const_cast<MetricSummary&>(std::as_const(*this).get(m));
}

AggregateReport aggregate_report(const ScoreMatrix& m, std::size_t num_bootstrap, double alpha,
                                 std::uint64_t seed) {
  AggregateReport rep;
  rep.num_bootstrap = num_bootstrap;
  rep.alpha = alpha;
  for (Metric metric : kAllMetrics) {
    Rng rng(seed);
    rep.get(metric) = {aggregate(m, metric),
                       stratified_bootstrap_ci(m, metric, num_bootstrap, alpha, rng)};
  }
  return rep;
}

double value_at(const ScoreSeries& s, std::int64_t step) {
  const auto it = std::upper_bound(s.steps.begin(), s.steps.end(), step);
  if (it == s.steps.begin()) return std::numeric_limits<double>::quiet_NaN();
  return s.values[static_cast<std::size_t>(std::distance(s.steps.begin(), it) - 1)];
}

ScoreMatrix score_matrix_at(const std::vector<ScoreSeries>& runs, std::int64_t step) {
  std::map<std::string, std::vector<double>> by_task;
  for (const ScoreSeries& s : runs) by_task[s.task].push_back(value_at(s, step));
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (auto& [name, col] : by_task) {
    names.push_back(name);
    cols.push_back(std::move(col));
  }
  return ScoreMatrix(std::move(names), std::move(cols));
}

std::vector<CurvePoint> sample_efficiency_curve(const std::vector<ScoreSeries>& runs,
                                                Metric metric,
                                                std::span<const std::int64_t> checkpoints,
                                                std::size_t num_bootstrap, double alpha,
                                                Rng& rng) {
  if (runs.empty()) throw MetricsError("sample_efficiency_curve: no runs");
  std::vector<CurvePoint> out;
  out.reserve(checkpoints.size());
  for (std::int64_t step : checkpoints) {
    const ScoreMatrix m = score_matrix_at(runs, step);
    const Interval ci = stratified_bootstrap_ci(m, metric, num_bootstrap, alpha, rng);
    out.push_back({step, aggregate(m, metric), ci.lo, ci.hi});
  }
  return out;
}

}  // namespace dutd
