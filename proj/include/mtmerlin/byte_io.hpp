#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>

#include "mtmerlin/error.hpp"

namespace mtmerlin::bytes {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
  requires std::is_arithmetic_v<T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorCode::Format, "unexpected end of stream");
  return v;
}

inline void expect(std::istream& is, const unsigned char* magic, std::size_t n, const char* what) {
  for (std::size_t i = 0; i < n; ++i) {
    if (get<std::uint8_t>(is) != magic[i]) throw Error(ErrorCode::Format, std::string("bad magic for ") + what);
  }
}

}  // namespace mtmerlin::bytes
