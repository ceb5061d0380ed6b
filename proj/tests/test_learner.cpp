#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "dutd/learner.hpp"
#include "dutd/rng.hpp"
#include "oracles.hpp"

using namespace dutd;

namespace {

std::vector<Transition> random_batch(Rng& rng, std::size_t n, std::size_t sd, std::size_t ad) {
  std::vector<Transition> out(n);
  for (auto& t : out) {
    t.state.resize(sd);
    t.action.resize(ad);
    t.next_state.resize(sd);
    for (double& x : t.state) x = rng.normal();
    for (double& x : t.action) x = rng.uniform(-1, 1);
    for (double& x : t.next_state) x = rng.normal();
    t.reward = rng.normal();
  }
  return out;
}

// Largest singular value of a fan_in x fan_out matrix by power iteration.
double spectral_norm(std::span<const double> w, std::size_t rows, std::size_t cols) {
  std::vector<double> v(cols, 1.0), u(rows);
  double sigma = 0.0;
  for (int it = 0; it < 500; ++it) {
    for (std::size_t i = 0; i < rows; ++i) {
      u[i] = 0.0;
      for (std::size_t j = 0; j < cols; ++j) u[i] += w[i * cols + j] * v[j];
    }
    double nv = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      v[j] = 0.0;
      for (std::size_t i = 0; i < rows; ++i) v[j] += w[i * cols + j] * u[i];
      nv += v[j] * v[j];
    }
    nv = std::sqrt(nv);
    for (double& x : v) x /= nv;
    sigma = std::sqrt(nv);
  }
  return sigma;
}

// Loss gradient of the linear model y = W^T x + b, written out directly.
std::vector<double> linear_gradient(const MlpWorldModel& m, const std::vector<Transition>& batch) {
  const std::size_t sd = m.state_dim(), ad = m.action_dim(), in = sd + ad, out = sd + 1;
  const auto w = m.layer_weights(0);
  const auto b = m.layer_bias(0);
  std::vector<double> g(in * out + out, 0.0);
  const double scale = 2.0 / static_cast<double>(batch.size() * out);
  for (const auto& t : batch) {
    std::vector<double> x(t.state);
    x.insert(x.end(), t.action.begin(), t.action.end());
    std::vector<double> target(t.next_state);
    target.push_back(t.reward);
    for (std::size_t o = 0; o < out; ++o) {
      double y = b[o];
      for (std::size_t i = 0; i < in; ++i) y += x[i] * w[i * out + o];
      const double r = scale * (y - target[o]);
      for (std::size_t i = 0; i < in; ++i) g[i * out + o] += x[i] * r;
      g[in * out + o] += r;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("construction") {
  MlpWorldModel a(3, 1, {32, 32}, 7), b(3, 1, {32, 32}, 7), c(3, 1, {32, 32}, 8);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.layer_sizes() == std::vector<std::size_t>{4, 32, 32, 4});
  CHECK(a.parameters().size() == 4 * 32 + 32 + 32 * 32 + 32 + 32 * 4 + 4);
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(a.layer_sizes()[l]));
    for (double w : a.layer_weights(l)) REQUIRE(std::abs(w) <= bound);
    for (double v : a.layer_bias(l)) REQUIRE(v == 0.0);
  }
  MlpWorldModel linear(3, 1, {}, 1);
  CHECK(linear.num_layers() == 1);
  CHECK_THROWS_AS(MlpWorldModel(0, 1, {8}, 1), ModelError);
  CHECK_THROWS_AS(MlpWorldModel(2, 0, {8}, 1), ModelError);
  CHECK_THROWS_AS(MlpWorldModel(2, 1, {0}, 1), ModelError);
}

TEST_CASE("prediction") {
  MlpWorldModel m(3, 1, {16}, 2);
  for (double& p : m.parameters()) p = 0.0;
  const std::vector<double> s{0.3, -0.2, 1.0}, a{0.5};
  auto p = m.predict(s, a);
  CHECK(p.next_state == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(p.reward == 0.0);

  MlpWorldModel r(3, 1, {16}, 2);
  CHECK(r.predict(s, a).next_state == r.predict(s, a).next_state);
  CHECK_THROWS_AS(r.predict(std::vector<double>{1.0}, a), ModelError);
}

TEST_CASE("input sensitivity is bounded by the product of layer norms") {
  MlpWorldModel m(3, 1, {8, 8}, 4);
  double lip = 1.0;
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    lip *= spectral_norm(m.layer_weights(l), m.layer_sizes()[l], m.layer_sizes()[l + 1]);
  }
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s{rng.normal(), rng.normal(), rng.normal()}, a{rng.uniform(-1, 1)};
    const auto base = m.predict(s, a);
    const double eps = 1e-3;
    const std::size_t coord = rng.index(4);
    if (coord < 3) s[coord] += eps; else a[0] += eps;
    const auto moved = m.predict(s, a);
    double d2 = (moved.reward - base.reward) * (moved.reward - base.reward);
    for (std::size_t i = 0; i < 3; ++i) {
      d2 += (moved.next_state[i] - base.next_state[i]) * (moved.next_state[i] - base.next_state[i]);
    }
    REQUIRE(std::sqrt(d2) <= lip * eps * (1.0 + 1e-9));
  }
}

TEST_CASE("loss") {
  MlpWorldModel m(3, 1, {4}, 1);
  for (double& p : m.parameters()) p = 0.0;
  Transition t;
  t.state = {1, 2, 3};
  t.action = {0};
  t.next_state = {0, 0, 0};
  t.reward = 0.0;
  CHECK(m.loss(std::vector<Transition>{t}).value == 0.0);
  t.next_state[1] = 1.0;
  const auto one = m.loss(std::vector<Transition>{t});
  CHECK(one.value == 0.25);
  CHECK(one.num_examples == 1);
  CHECK_THROWS_AS(m.loss(std::vector<Transition>{}), ModelError);

  Rng rng(5);
  MlpWorldModel r(3, 1, {8}, 3);
  const auto batch = random_batch(rng, 17, 3, 1);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  CHECK(r.loss(batch).value == doctest::Approx(r.loss(doubled).value).epsilon(1e-15));
  const auto params = std::vector<double>(r.parameters().begin(), r.parameters().end());
  const auto first = r.evaluate(batch);
  for (int i = 0; i < 5; ++i) CHECK(r.evaluate(batch) == first);
  CHECK(std::vector<double>(r.parameters().begin(), r.parameters().end()) == params);
}

TEST_CASE("training") {
  Rng rng(8);
  const auto batch = random_batch(rng, 32, 3, 1);
  MlpWorldModel a(3, 1, {16}, 1), b(3, 1, {16}, 1);
  const MlpWorldModel before = a;
  a.train_step(batch, 0.0);
  CHECK(a == before);
  for (int i = 0; i < 10; ++i) {
    a.train_step(batch, 0.05);
    b.train_step(batch, 0.05);
  }
  CHECK(a == b);
  CHECK_THROWS_AS(a.train_step(batch, -1.0), ModelError);
  CHECK_THROWS_AS(a.train_step(std::vector<Transition>{}, 0.1), ModelError);

  MlpWorldModel lin(3, 1, {}, 2);
  double prev = lin.loss(batch).value;
  bool monotone = true;
  for (int i = 0; i < 200; ++i) {
    const double pre = lin.train_step(batch, 0.01);
    monotone = monotone && pre <= prev + 1e-15;
    prev = pre;
  }
  CHECK(monotone);
  CHECK(lin.loss(batch).value < prev);
}

TEST_CASE("divergence leaves parameters untouched") {
  Rng rng(8);
  auto batch = random_batch(rng, 4, 2, 1);
  batch[0].reward = 1e10;
  MlpWorldModel m(2, 1, {4}, 1);
  const MlpWorldModel before = m;
  CHECK_THROWS_AS(m.train_step(batch, 1e308), DivergenceError);
  CHECK(m == before);
}

TEST_CASE("backprop matches the closed-form linear gradient") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    MlpWorldModel m(3, 2, {}, static_cast<std::uint64_t>(trial));
    for (double& p : m.parameters()) p = rng.normal();
    const auto batch = random_batch(rng, 20, 3, 2);
    const auto g = m.gradient(batch);
    const auto want = linear_gradient(m, batch);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, oracle::rel_err(g[i], want[i]));
    CHECK(worst < 1e-6);
    CHECK(gradient_check(m, batch, 1e-5) < 1e-6);
  }
}

TEST_CASE("gradient check on random tanh networks") {
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t sd = 1 + rng.index(4), ad = 1 + rng.index(2);
    std::vector<std::size_t> hidden;
    for (std::size_t l = 0, nl = 1 + rng.index(2); l < nl; ++l) hidden.push_back(2 + rng.index(10));
    MlpWorldModel m(sd, ad, hidden, rng.next_u64());
    for (double& p : m.parameters()) p += rng.normal(0.0, 0.1);
    worst = std::max(worst, gradient_check(m, random_batch(rng, 1 + rng.index(16), sd, ad), 1e-5));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient check with everything zero") {
  MlpWorldModel m(2, 1, {3}, 1);
  for (double& p : m.parameters()) p = 0.0;
  Transition t;
  t.state = {0, 0};
  t.action = {0};
  t.next_state = {0, 0};
  CHECK(gradient_check(m, std::vector<Transition>{t, t}, 1e-5) == 0.0);
  CHECK_THROWS(gradient_check(m, std::vector<Transition>{t}, 0.01));
}

TEST_CASE("save and load") {
  MlpWorldModel m(3, 1, {5, 4}, 6);
  std::stringstream ss;
  m.save(ss);
  CHECK(ss.str().substr(0, 4) == "DUTM");
  CHECK(MlpWorldModel::load(ss) == m);
  std::stringstream bad("DUTX");
  CHECK_THROWS(MlpWorldModel::load(bad));
}
