#include "dutd/learner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "binary_io.hpp"
#include "dutd/kernels.hpp"
#include "dutd/rng.hpp"

namespace dutd {

Prediction DynamicsModel::predict(std::span<const double> state,
                                  std::span<const double> action) const {
  if (state.size() != state_dim() || action.size() != action_dim()) {
    throw ModelError("predict: input dimension mismatch");
  }
  Prediction p;
  p.next_state.resize(state_dim());
  predict_batch(state, action, 1, p.next_state, std::span<double>(&p.reward, 1));
  return p;
}

struct MlpWorldModel::Packed {
  std::vector<double> inputs;   // n x (state_dim + action_dim)
  std::vector<double> targets;  // n x (state_dim + 1)
  std::size_t n = 0;
};

namespace {

constexpr std::array<char, 4> kModelMagic{'D', 'U', 'T', 'M'};
constexpr std::uint32_t kModelVersion = 1;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

MlpWorldModel::MlpWorldModel(std::size_t state_dim, std::size_t action_dim,
                             std::vector<std::size_t> hidden_sizes, std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), hidden_(std::move(hidden_sizes)) {
  if (state_dim_ == 0) throw ModelError("state_dim must be positive");
  if (action_dim_ == 0) throw ModelError("action_dim must be positive");
  if (std::find(hidden_.begin(), hidden_.end(), 0u) != hidden_.end()) {
    throw ModelError("hidden layer sizes must be positive");
  }
  layer_sizes_.push_back(state_dim_ + action_dim_);
  layer_sizes_.insert(layer_sizes_.end(), hidden_.begin(), hidden_.end());
  layer_sizes_.push_back(state_dim_ + 1);

  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
  }
  params_.assign(total, 0.0);

  Rng rng(derive_seed(seed, "mlp-init"));
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const std::size_t fan_in = layer_sizes_[l];
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    double* w = params_.data() + offsets_[l];
    for (std::size_t i = 0; i < fan_in * layer_sizes_[l + 1]; ++i) w[i] = rng.uniform(-limit, limit);
  }
}

std::span<const double> MlpWorldModel::layer_weights(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer), layer_sizes_[layer] * layer_sizes_[layer + 1]};
}

std::span<const double> MlpWorldModel::layer_bias(std::size_t layer) const {
  const std::size_t w = layer_sizes_[layer] * layer_sizes_[layer + 1];
  return {params_.data() + offsets_.at(layer) + w, layer_sizes_[layer + 1]};
}

void MlpWorldModel::forward(const double* inputs, std::size_t n,
                            std::vector<std::vector<double>>& acts) const {
  const auto& k = kernels::active();
  acts.resize(layer_sizes_.size());
  acts[0].assign(inputs, inputs + n * layer_sizes_[0]);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const std::size_t fin = layer_sizes_[l];
    const std::size_t fout = layer_sizes_[l + 1];
    const double* wt = params_.data() + offsets_[l];
    const double* b = wt + fin * fout;
    auto& out = acts[l + 1];
    out.resize(n * fout);
    k.dense_forward(acts[l].data(), n, fin, wt, b, fout, out.data());
    if (l + 1 < num_layers()) k.tanh_inplace(out.data(), out.size());
  }
}

void MlpWorldModel::predict_batch(std::span<const double> states, std::span<const double> actions,
                                  std::size_t n, std::span<double> next_states,
                                  std::span<double> rewards) const {
  if (states.size() != n * state_dim_ || actions.size() != n * action_dim_ ||
      next_states.size() != n * state_dim_ || rewards.size() != n) {
    throw ModelError("predict_batch: buffer dimension mismatch");
  }
  const std::size_t in = layer_sizes_[0];
  std::vector<double> inputs(n * in);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(states.data() + r * state_dim_, state_dim_, inputs.data() + r * in);
    std::copy_n(actions.data() + r * action_dim_, action_dim_, inputs.data() + r * in + state_dim_);
  }
  std::vector<std::vector<double>> acts;
  forward(inputs.data(), n, acts);
  const auto& out = acts.back();
  const std::size_t m = state_dim_ + 1;
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(out.data() + r * m, state_dim_, next_states.data() + r * state_dim_);
    rewards[r] = out[r * m + state_dim_];
  }
}

MlpWorldModel::Packed MlpWorldModel::pack(std::span<const Transition> data) const {
  Packed p;
  p.n = data.size();
  const std::size_t in = layer_sizes_[0];
  const std::size_t m = state_dim_ + 1;
  p.inputs.resize(p.n * in);
  p.targets.resize(p.n * m);
  for (std::size_t r = 0; r < p.n; ++r) {
    const Transition& t = data[r];
    if (t.state.size() != state_dim_ || t.action.size() != action_dim_ ||
        t.next_state.size() != state_dim_) {
      throw ModelError("transition dimension does not match the model");
    }
    std::copy(t.state.begin(), t.state.end(), p.inputs.begin() + r * in);
    std::copy(t.action.begin(), t.action.end(), p.inputs.begin() + r * in + state_dim_);
    std::copy(t.next_state.begin(), t.next_state.end(), p.targets.begin() + r * m);
    p.targets[r * m + state_dim_] = t.reward;
  }
  return p;
}

double MlpWorldModel::loss_and_gradient(std::span<const Transition> batch,
                                        std::vector<double>* grad) const {
  if (batch.empty()) throw ModelError("loss requires at least one transition");
  const auto& k = kernels::active();
  const Packed p = pack(batch);
  std::vector<std::vector<double>> acts;
  forward(p.inputs.data(), p.n, acts);

  const std::size_t m = state_dim_ + 1;
  const auto& out = acts.back();
  double total = 0.0;
  for (std::size_t r = 0; r < p.n; ++r) {
    total += k.squared_distance(out.data() + r * m, p.targets.data() + r * m, m);
  }
  const double scale = 1.0 / (static_cast<double>(p.n) * static_cast<double>(m));
  const double value = total * scale;
  if (!grad) return value;

  grad->assign(params_.size(), 0.0);
  // delta holds dLoss/dZ for the current layer's pre-activations.
  std::vector<double> delta(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) delta[i] = 2.0 * scale * (out[i] - p.targets[i]);

  std::vector<double> prev_delta;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const std::size_t fin = layer_sizes_[l];
    const std::size_t fout = layer_sizes_[l + 1];
    const double* wt = params_.data() + offsets_[l];
    double* gw = grad->data() + offsets_[l];
    double* gb = gw + fin * fout;
    const auto& a_prev = acts[l];
    const bool propagate = l > 0;
    if (propagate) prev_delta.assign(p.n * fin, 0.0);
    for (std::size_t r = 0; r < p.n; ++r) {
      const double* d = delta.data() + r * fout;
      const double* x = a_prev.data() + r * fin;
      k.axpy(1.0, d, gb, fout);
      for (std::size_t j = 0; j < fin; ++j) {
        k.axpy(x[j], d, gw + j * fout, fout);
        if (propagate) {
          const double ap = x[j];
          prev_delta[r * fin + j] = k.dot(wt + j * fout, d, fout) * (1.0 - ap * ap);
        }
      }
    }
    if (propagate) delta.swap(prev_delta);
  }
  return value;
}

LossReport MlpWorldModel::loss(std::span<const Transition> data) const {
  return {loss_and_gradient(data, nullptr), data.size()};
}

std::vector<double> MlpWorldModel::gradient(std::span<const Transition> batch) const {
  std::vector<double> g;
  loss_and_gradient(batch, &g);
  return g;
}

double MlpWorldModel::train_step(std::span<const Transition> batch, double learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ModelError("learning rate must be finite and non-negative");
  }
  std::vector<double> g;
  const double before = loss_and_gradient(batch, &g);
  if (!std::isfinite(before) || !all_finite(g)) {
    throw DivergenceError("non-finite loss or gradient; update skipped");
  }
  std::vector<double> updated = params_;
  kernels::active().axpy(-learning_rate, g.data(), updated.data(), g.size());
  if (!all_finite(updated)) throw DivergenceError("update produced non-finite parameters");
  params_.swap(updated);
  return before;
}

void MlpWorldModel::save(std::ostream& out) const {
  io::write_magic(out, kModelMagic);
  io::write_pod(out, kModelVersion);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(state_dim_));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(action_dim_));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(hidden_.size()));
  for (std::size_t h : hidden_) io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  io::write_pod<std::uint64_t>(out, params_.size());
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) throw io::FormatError("failed writing model");
}

MlpWorldModel MlpWorldModel::load(std::istream& in) {
  io::expect_magic(in, kModelMagic, "model checkpoint");
  if (io::read_pod<std::uint32_t>(in) != kModelVersion) {
    throw io::FormatError("unsupported model checkpoint version");
  }
  const auto sd = io::read_pod<std::uint32_t>(in);
  const auto ad = io::read_pod<std::uint32_t>(in);
  std::vector<std::size_t> hidden(io::read_pod<std::uint32_t>(in));
  for (auto& h : hidden) h = io::read_pod<std::uint32_t>(in);
  MlpWorldModel model(sd, ad, hidden, 0);
  if (io::read_pod<std::uint64_t>(in) != model.params_.size()) {
    throw io::FormatError("parameter count does not match architecture");
  }
  in.read(reinterpret_cast<char*>(model.params_.data()),
          static_cast<std::streamsize>(model.params_.size() * sizeof(double)));
  if (!in) throw io::FormatError("truncated model checkpoint");
  return model;
}

namespace {

// loss() evaluated by plain loops in extended precision. Central differences
// of the double-precision loss lose about eps_machine / eps of absolute
// accuracy to cancellation, which swamps gradients below ~1e-7.
long double reference_loss(const MlpWorldModel& model, std::span<const double> params,
                           std::span<const Transition> batch) {
  const auto& sizes = model.layer_sizes();
  const std::size_t m = model.state_dim() + 1;
  long double total = 0.0L;
  std::vector<long double> x, y;
  for (const Transition& t : batch) {
    x.assign(t.state.begin(), t.state.end());
    x.insert(x.end(), t.action.begin(), t.action.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const std::size_t fin = sizes[l], fout = sizes[l + 1];
      y.assign(params.begin() + static_cast<std::ptrdiff_t>(off + fin * fout),
               params.begin() + static_cast<std::ptrdiff_t>(off + fin * fout + fout));
      for (std::size_t j = 0; j < fin; ++j) {
        for (std::size_t o = 0; o < fout; ++o) y[o] += x[j] * static_cast<long double>(params[off + j * fout + o]);
      }
      if (l + 2 < sizes.size()) {
        for (long double& v : y) v = std::tanh(v);
      }
      off += fin * fout + fout;
      x.swap(y);
    }
    long double se = 0.0L;
    for (std::size_t i = 0; i + 1 < m; ++i) se += (x[i] - t.next_state[i]) * (x[i] - t.next_state[i]);
    se += (x[m - 1] - t.reward) * (x[m - 1] - t.reward);
    total += se / static_cast<long double>(m);
  }
  return total / static_cast<long double>(batch.size());
}

}  // namespace

double gradient_check(const MlpWorldModel& model, std::span<const Transition> batch, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ModelError("eps must lie in (0, 1e-3]");
  const std::vector<double> analytic = model.gradient(batch);
  std::vector<double> params(model.parameters().begin(), model.parameters().end());
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const long double up = reference_loss(model, params, batch);
    params[i] = saved - eps;
    const long double down = reference_loss(model, params, batch);
    params[i] = saved;
    const double fd = static_cast<double>((up - down) / (2.0L * static_cast<long double>(eps)));
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace dutd
