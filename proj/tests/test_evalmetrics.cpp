#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dutd/evalmetrics.hpp"
#include "dutd/rng.hpp"
#include "oracles.hpp"

using namespace dutd;

namespace {

std::vector<double> fuzz(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.5, 0.6);
  return v;
}

}  // namespace

TEST_CASE("normalized score") {
  CHECK(normalized_score(-900, -900, -150) == 0.0);
  CHECK(normalized_score(-150, -900, -150) == 1.0);
  CHECK(normalized_score(600, 100, 1100) == 0.5);
  CHECK(normalized_score(2100, 100, 1100) == 2.0);
  CHECK_THROWS_AS(normalized_score(1, 3, 3), MetricsError);
}

TEST_CASE("point metrics") {
  const std::vector<double> eight{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK(iqm(eight) == 4.5);
  CHECK(iqm(eight) == oracle::iqm(eight));
  CHECK(iqm(std::vector<double>{5, 5, 5, 5}) == 5.0);
  CHECK(iqm(std::vector<double>{4, 1, 3, 2}) == 2.5);
  CHECK(iqm(std::vector<double>{1, 10, 4}) == 5.0);
  CHECK(optimality_gap(std::vector<double>{0.5, 1.5}) == 0.25);
  CHECK(optimality_gap(std::vector<double>{1.0, 3.0}) == 0.0);
  CHECK(optimality_gap(std::vector<double>{0.0, 0.0}) == 1.0);
  CHECK(median(std::vector<double>{3, 1, 2}) == 2.0);
  CHECK(median(std::vector<double>{4, 1, 2, 3}) == 2.5);
  CHECK(mean(std::vector<double>{1, 2}) == 1.5);
  CHECK_THROWS_AS(iqm(std::vector<double>{}), MetricsError);
  CHECK_THROWS_AS(optimality_gap(std::vector<double>{}), MetricsError);
  CHECK(percentile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(percentile({0, 10}, 0.25) == 2.5);
}

TEST_CASE("metric properties on fuzzed samples") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    auto xs = fuzz(rng, 1 + rng.index(40));
    const double q = iqm(xs);
    REQUIRE(q >= *std::min_element(xs.begin(), xs.end()) - 1e-12);
    REQUIRE(q <= *std::max_element(xs.begin(), xs.end()) + 1e-12);
    REQUIRE(oracle::rel_err(q, oracle::iqm(xs)) < 1e-12);
    if (xs.size() < 4) REQUIRE(q == doctest::Approx(oracle::mean(xs)).epsilon(1e-12));
    std::vector<double> clipped;
    for (double x : xs) clipped.push_back(std::min(x, 1.0));
    REQUIRE(optimality_gap(xs) == doctest::Approx(1.0 - oracle::mean(clipped)).epsilon(1e-12));

    auto shuffled = xs;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(rng.index(xs.size())),
                shuffled.end());
    REQUIRE(iqm(shuffled) == doctest::Approx(q).epsilon(1e-12));
    REQUIRE(median(shuffled) == median(xs));
    REQUIRE(optimality_gap(shuffled) == doctest::Approx(optimality_gap(xs)).epsilon(1e-12));
  }
}

TEST_CASE("aggregate over a matrix") {
  ScoreMatrix one({"a"}, {{0.7}});
  for (Metric m : {Metric::mean, Metric::median, Metric::iqm}) CHECK(aggregate(one, m) == 0.7);
  ScoreMatrix ones({"a", "b"}, {{1, 1}, {1, 1}});
  CHECK(aggregate(ones, Metric::optimality_gap) == 0.0);
  ScoreMatrix two({"a", "b"}, {{0, 1}, {2, 3}});
  CHECK(aggregate(two, Metric::mean) == 1.5);
  ScoreMatrix swapped({"b", "a"}, {{3, 2}, {1, 0}});
  for (Metric m : kAllMetrics) CHECK(aggregate(two, m) == aggregate(swapped, m));
  CHECK_THROWS_AS(ScoreMatrix({"a", "b"}, {{1, 2}, {3}}), MetricsError);
  CHECK_THROWS_AS(aggregate(ScoreMatrix{}, Metric::mean), MetricsError);
}

TEST_CASE("bootstrap examples") {
  Rng rng(1);
  ScoreMatrix constant({"a", "b"}, {{0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}});
  auto ci = stratified_bootstrap_ci(constant, Metric::iqm, 500, 0.05, rng);
  CHECK(ci.lo == doctest::Approx(0.3));
  CHECK(ci.hi == doctest::Approx(0.3));

  ScoreMatrix span({"a"}, {{0, 10}});
  ci = stratified_bootstrap_ci(span, Metric::mean, 5000, 0.05, rng);
  CHECK(ci.lo >= 0.0);
  CHECK(ci.hi <= 10.0);
  CHECK_THROWS_AS(stratified_bootstrap_ci(span, Metric::mean, 0, 0.05, rng), MetricsError);
  CHECK_THROWS_AS(stratified_bootstrap_ci(span, Metric::mean, 10, 1.0, rng), MetricsError);
}

TEST_CASE("bootstrap matches the brute-force resampler") {
  const std::vector<std::vector<double>> cols{{0.1, 0.9}, {0.4, 1.3}};
  ScoreMatrix m({"a", "b"}, cols);
  const auto want = oracle::bootstrap_mean(cols, 10, 77, 0.05);
  Rng rng(77);
  std::vector<double> got;
  stratified_resamples(m, 10, rng, [&](const ScoreMatrix& r) { got.push_back(aggregate(r, Metric::mean)); });
  CHECK(got == want.stats);
  Rng rng2(77);
  const auto ci = stratified_bootstrap_ci(m, Metric::mean, 10, 0.05, rng2);
  CHECK(ci.lo == want.lo);
  CHECK(ci.hi == want.hi);
}

TEST_CASE("resamples keep per-task run counts") {
  ScoreMatrix m({"a", "b", "c"}, {{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}});
  Rng rng(2);
  std::size_t count = 0;
  bool shape = true, within = true;
  stratified_resamples(m, 300, rng, [&](const ScoreMatrix& r) {
    ++count;
    shape = shape && r.num_tasks() == 3 && r.num_runs() == 4 && r.tasks() == m.tasks();
    for (std::size_t t = 0; t < 3; ++t) {
      for (double v : r.task_scores(t)) within = within && v >= 1 + 4.0 * t && v <= 4 + 4.0 * t;
    }
  });
  CHECK(count == 300);
  CHECK(shape);
  CHECK(within);
}

TEST_CASE("intervals usually cover the point estimate") {
  Rng data(5);
  int covered = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    ScoreMatrix m({"a", "b"}, {fuzz(data, 10), fuzz(data, 10)});
    Rng rng(static_cast<std::uint64_t>(trial));
    const auto ci = stratified_bootstrap_ci(m, Metric::iqm, 1000, 0.05, rng);
    REQUIRE(ci.lo <= ci.hi);
    const double p = aggregate(m, Metric::iqm);
    if (ci.lo <= p && p <= ci.hi) ++covered;
  }
  CHECK(covered >= trials * 99 / 100);
}

TEST_CASE("aggregate report is reproducible") {
  Rng data(6);
  ScoreMatrix m({"a"}, {fuzz(data, 8)});
  const auto a = aggregate_report(m, 300, 0.1, 9);
  const auto b = aggregate_report(m, 300, 0.1, 9);
  for (Metric x : kAllMetrics) {
    CHECK(a.get(x).point == aggregate(m, x));
    CHECK(a.get(x).ci.lo == b.get(x).ci.lo);
    CHECK(a.get(x).ci.hi == b.get(x).ci.hi);
  }
  CHECK(a.num_bootstrap == 300);
}

TEST_CASE("sample efficiency curves") {
  ScoreSeries single{"t", {100, 200, 300}, {0.1, 0.4, 0.2}};
  const std::vector<std::int64_t> grid{100, 200, 300};
  Rng rng(1);
  auto curve = sample_efficiency_curve({single}, Metric::iqm, grid, 200, 0.05, rng);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(curve[i].step == grid[i]);
    CHECK(curve[i].point == single.values[i]);
    CHECK(curve[i].lo == curve[i].point);
    CHECK(curve[i].hi == curve[i].point);
  }

  std::vector<ScoreSeries> flat, rising;
  for (int r = 0; r < 5; ++r) {
    flat.push_back({"t", {100, 200, 300}, {0.2 * r, 0.2 * r, 0.2 * r}});
    rising.push_back({"t", {100, 200, 300}, {0.1 * r, 0.1 * r + 1, 0.1 * r + 2}});
  }
  curve = sample_efficiency_curve(flat, Metric::iqm, grid, 200, 0.05, rng);
  CHECK(curve[0].point == curve[1].point);
  CHECK(curve[1].point == curve[2].point);
  curve = sample_efficiency_curve(rising, Metric::iqm, grid, 200, 0.05, rng);
  CHECK(curve[0].point < curve[1].point);
  CHECK(curve[1].point < curve[2].point);

  CHECK(std::isnan(value_at(single, 50)));
  CHECK(value_at(single, 250) == 0.4);
  CHECK(value_at(single, 1000) == 0.2);
  CHECK_THROWS_AS(sample_efficiency_curve({}, Metric::iqm, grid, 10, 0.05, rng), MetricsError);
}
