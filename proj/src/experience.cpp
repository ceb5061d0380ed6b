#include "dutd/experience.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "binary_io.hpp"

namespace dutd {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

constexpr std::array<char, 4> kStoreMagic{'D', 'U', 'T', 'B'};
constexpr std::uint32_t kStoreVersion = 1;

}  // namespace

TransitionStore::TransitionStore(std::size_t capacity) {
  if (capacity == 0) throw BufferError("buffer capacity must be positive");
  storage_.resize(capacity);
}

void TransitionStore::push(Transition t) {
  if (t.state.size() != t.next_state.size()) {
    throw BufferError("state and next_state dimensions differ");
  }
  if (t.state.empty()) throw BufferError("state dimension must be positive");
  if (dims_known_ && (t.state.size() != state_dim_ || t.action.size() != action_dim_)) {
    throw BufferError("transition dimension mismatch: expected state " +
                      std::to_string(state_dim_) + ", action " + std::to_string(action_dim_) +
                      "; got " + std::to_string(t.state.size()) + ", " +
                      std::to_string(t.action.size()));
  }
  if (!all_finite(t.state) || !all_finite(t.action) || !all_finite(t.next_state) ||
      !std::isfinite(t.reward)) {
    throw BufferError("transition contains a non-finite value");
  }
  if (!dims_known_) {
    state_dim_ = t.state.size();
    action_dim_ = t.action.size();
    dims_known_ = true;
  }

  const std::size_t cap = storage_.size();
  if (size_ < cap) {
    storage_[(head_ + size_) % cap] = std::move(t);
    ++size_;
  } else {
    storage_[head_] = std::move(t);
    head_ = (head_ + 1) % cap;
  }
}

const Transition& TransitionStore::at(std::size_t i) const {
  if (i >= size_) throw BufferError("index out of range");
  return storage_[(head_ + i) % storage_.size()];
}

std::vector<Transition> TransitionStore::ordered() const {
  std::vector<Transition> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(at(i));
  return out;
}

std::vector<Transition> ReplayBuffer::sample_batch(std::size_t n, Rng& rng) const {
  if (empty()) throw BufferError("cannot sample from an empty buffer");
  std::vector<Transition> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.push_back(at(rng.index(size())));
  return batch;
}

void write_store(std::ostream& out, const TransitionStore& store) {
  io::write_magic(out, kStoreMagic);
  io::write_pod(out, kStoreVersion);
  io::write_pod<std::uint64_t>(out, store.capacity());
  io::write_pod<std::uint64_t>(out, store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Transition& t = store.at(i);
    std::string rec;
    io::append_vec(rec, t.state);
    io::append_vec(rec, t.action);
    io::append_pod(rec, t.reward);
    io::append_vec(rec, t.next_state);
    io::append_pod<std::uint8_t>(rec, t.terminal ? 1 : 0);
    io::append_pod(rec, t.sequence_id);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rec.size()));
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw BufferError("failed writing transition stream");
}

void read_store(std::istream& in, TransitionStore& store) {
  io::expect_magic(in, kStoreMagic, "transition stream");
  if (io::read_pod<std::uint32_t>(in) != kStoreVersion) {
    throw io::FormatError("unsupported transition stream version");
  }
  io::read_pod<std::uint64_t>(in);  // capacity of the writer; the reader keeps its own
  const auto count = io::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = io::read_pod<std::uint32_t>(in);
    std::string rec(len, '\0');
    in.read(rec.data(), len);
    if (!in) throw io::FormatError("truncated transition record");
    io::Cursor cur{rec};
    Transition t;
    t.state = cur.vec();
    t.action = cur.vec();
    t.reward = cur.pod<double>();
    t.next_state = cur.vec();
    t.terminal = cur.pod<std::uint8_t>() != 0;
    t.sequence_id = cur.pod<std::uint64_t>();
    if (!cur.done()) throw io::FormatError("trailing bytes in transition record");
    store.push(std::move(t));
  }
}

}  // namespace dutd
