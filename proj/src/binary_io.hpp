#pragma once

// Little-endian POD serialization helpers shared by the checkpoint formats.
// The formats assume a little-endian host; this is checked at compile time.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace dutd::io {

static_assert(std::endian::native == std::endian::little,
              "checkpoint formats are defined as little-endian");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
void write_pod(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("unexpected end of stream");
  return v;
}

inline void write_magic(std::ostream& out, const std::array<char, 4>& magic) {
  out.write(magic.data(), 4);
}

inline void expect_magic(std::istream& in, const std::array<char, 4>& magic,
                         std::string_view what) {
  std::array<char, 4> got{};
  in.read(got.data(), 4);
  if (!in || got != magic) throw FormatError("bad magic header for " + std::string(what));
}

template <class T>
void append_pod(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

/// u32 length followed by the doubles.
inline void append_vec(std::string& buf, const std::vector<double>& v) {
  append_pod<std::uint32_t>(buf, static_cast<std::uint32_t>(v.size()));
  buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

struct Cursor {
  std::string_view data;
  std::size_t pos = 0;

  template <class T>
  T pod() {
    if (pos + sizeof(T) > data.size()) throw FormatError("record too short");
    T v{};
    std::memcpy(&v, data.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }

  std::vector<double> vec() {
    const auto n = pod<std::uint32_t>();
    if (pos + std::size_t{n} * sizeof(double) > data.size()) throw FormatError("record too short");
    std::vector<double> v(n);
    std::memcpy(v.data(), data.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    return v;
  }

  bool done() const { return pos == data.size(); }
};

}  // namespace dutd::io
