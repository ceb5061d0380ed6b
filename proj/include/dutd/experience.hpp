#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "dutd/rng.hpp"

namespace dutd {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  /// Global sequence number assigned by the collector; used to audit that
  /// training and validation data never overlap.
  std::uint64_t sequence_id = 0;

  bool operator==(const Transition&) const = default;
};

class BufferError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-capacity FIFO store of transitions. Dimensions are established by
/// the first push and enforced afterwards.
class TransitionStore {
 public:
  explicit TransitionStore(std::size_t capacity);

  /// Appends, evicting the oldest entry when full. Throws BufferError for
  /// mismatched dimensions or non-finite entries.
  void push(Transition t);

  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return storage_.size(); }
  bool empty() const noexcept { return size_ == 0; }

  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// Every stored transition in insertion order.
  std::vector<Transition> ordered() const;

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t action_dim() const noexcept { return action_dim_; }

 private:
  std::vector<Transition> storage_;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t size_ = 0;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  bool dims_known_ = false;
};

class ReplayBuffer : public TransitionStore {
 public:
  static constexpr std::size_t kDefaultCapacity = 1'000'000;
  explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity) : TransitionStore(capacity) {}

  /// n uniform draws with replacement.
  std::vector<Transition> sample_batch(std::size_t n, Rng& rng) const;
};

/// Held-out transitions; never sampled for training.
class ValidationBuffer : public TransitionStore {
 public:
  static constexpr std::size_t kDefaultCapacity = 10'000;
  explicit ValidationBuffer(std::size_t capacity = kDefaultCapacity) : TransitionStore(capacity) {}

  std::vector<Transition> validation_pass() const { return ordered(); }
};

// Binary record stream: "DUTB" magic, u32 version, u64 capacity, u64 count,
// then `count` records each prefixed by its u32 byte length. See
// docs/formats.md for the record layout.
void write_store(std::ostream& out, const TransitionStore& store);
void read_store(std::istream& in, TransitionStore& store);

}  // namespace dutd
