#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sensordrop/error.hpp"

namespace sensordrop::io {

// Little-endian primitives, independent of host byte order.

inline void put_uint(std::ostream& os, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, bytes);
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_uint(os, v, 1); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_uint(os, v, 4); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_uint(os, v, 8); }
inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}
inline void put_f32(std::ostream& os, float v) {
  put_u32(os, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  std::uint64_t uint(int bytes) {
    unsigned char buf[8];
    is_.read(reinterpret_cast<char*>(buf), bytes);
    if (is_.gcount() != bytes) {
      throw FormatError(what_ + ": truncated file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
    return v;
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }

  void expect_magic(const char (&magic)[5]) {
    char buf[4];
    is_.read(buf, 4);
    if (is_.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
      throw FormatError(what_ + ": bad magic (not a " + magic + " file)");
    }
  }

  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

  const std::string& what() const { return what_; }

 private:
  std::istream& is_;
  std::string what_;
};

}  // namespace sensordrop::io
