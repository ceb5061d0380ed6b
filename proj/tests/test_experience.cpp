#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dutd/experience.hpp"

using namespace dutd;

namespace {

Transition tr(std::uint64_t id, std::size_t sd = 3, std::size_t ad = 1) {
  Transition t;
  t.state.assign(sd, 0.1 * static_cast<double>(id));
  t.action.assign(ad, -0.5);
  t.reward = -static_cast<double>(id);
  t.next_state.assign(sd, 0.2 * static_cast<double>(id));
  t.terminal = id % 7 == 0;
  t.sequence_id = id;
  return t;
}

std::vector<std::uint64_t> ids(const std::vector<Transition>& ts) {
  std::vector<std::uint64_t> out;
  for (const auto& t : ts) out.push_back(t.sequence_id);
  return out;
}

}  // namespace

TEST_CASE("push and FIFO eviction") {
  ReplayBuffer b(3);
  CHECK(b.empty());
  b.push(tr(1));
  CHECK(b.size() == 1);
  b.push(tr(2));
  b.push(tr(3));
  b.push(tr(4));
  CHECK(b.size() == 3);
  CHECK(ids(b.ordered()) == std::vector<std::uint64_t>{2, 3, 4});
  CHECK(b.at(0).sequence_id == 2);
  CHECK_THROWS_AS(b.at(3), BufferError);
}

TEST_CASE("FIFO order survives many wraps") {
  ValidationBuffer b(17);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    b.push(tr(i));
    const auto got = ids(b.validation_pass());
    const std::uint64_t first = i + 1 >= 17 ? i + 1 - 17 : 0;
    bool ok = got.size() == std::min<std::uint64_t>(i + 1, 17);
    for (std::size_t k = 0; ok && k < got.size(); ++k) ok = got[k] == first + k;
    REQUIRE(ok);
  }
}

TEST_CASE("invalid transitions are rejected") {
  ReplayBuffer b(10);
  Transition nan = tr(1);
  nan.reward = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(b.push(nan), BufferError);
  Transition inf = tr(1);
  inf.next_state[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(b.push(inf), BufferError);
  Transition ragged = tr(1);
  ragged.next_state.pop_back();
  CHECK_THROWS_AS(b.push(ragged), BufferError);
  CHECK(b.empty());

  b.push(tr(1));
  CHECK_THROWS_AS(b.push(tr(2, 4)), BufferError);
  CHECK_THROWS_AS(b.push(tr(2, 3, 2)), BufferError);
  CHECK(b.size() == 1);
}

TEST_CASE("sampling") {
  ReplayBuffer one(5);
  one.push(tr(9));
  Rng rng(1);
  const auto batch = one.sample_batch(4, rng);
  CHECK(batch.size() == 4);
  for (const auto& t : batch) CHECK(t == one.at(0));

  ReplayBuffer empty(5);
  CHECK_THROWS_AS(empty.sample_batch(1, rng), BufferError);

  ReplayBuffer big(10000);
  for (std::uint64_t i = 0; i < 10000; ++i) big.push(tr(i, 1, 1));
  Rng a(42), b(42);
  const auto first = ids(big.sample_batch(64, a));
  const auto second = ids(big.sample_batch(64, a));
  CHECK(first != second);
  CHECK(first == ids(big.sample_batch(64, b)));

  Rng r(7);
  std::set<std::uint64_t> seen;
  bool in_range = true;
  for (int i = 0; i < 10000; ++i) {
    for (auto id : ids(big.sample_batch(64, r))) {
      in_range = in_range && id < 10000;
      seen.insert(id);
    }
  }
  CHECK(in_range);
  // 640000 draws over 10000 slots: every slot is hit with overwhelming probability.
  CHECK(seen.size() == 10000);
}

TEST_CASE("empty validation pass") {
  ValidationBuffer v(4);
  CHECK(v.validation_pass().empty());
}

TEST_CASE("binary round trip") {
  ReplayBuffer b(5);
  for (std::uint64_t i = 0; i < 8; ++i) b.push(tr(i));
  std::stringstream ss;
  write_store(ss, b);
  ReplayBuffer c(5);
  read_store(ss, c);
  CHECK(c.ordered() == b.ordered());
  CHECK(c.state_dim() == 3);

  std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "DUTB");
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  ReplayBuffer d(5);
  CHECK_THROWS(read_store(bad, d));

  std::stringstream truncated(ss.str().substr(0, ss.str().size() - 3));
  ReplayBuffer e(5);
  CHECK_THROWS(read_store(truncated, e));
}
