#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "seer/errors.hpp"

namespace seer {

// Little-endian append helpers for the binary file formats.
inline void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u16(std::string& out, uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

// Bounds-checked little-endian reader; throws FormatError on short reads.
// base_offset places error messages at absolute file positions.
struct ByteCursor {
  const std::string& buf;
  size_t pos = 0;
  uint64_t base_offset = 0;

  size_t remaining() const { return buf.size() - pos; }

  void need(size_t n) const {
    if (pos + n > buf.size()) {
      throw FormatError("truncated data at offset " + std::to_string(base_offset + buf.size()));
    }
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) {
      v = static_cast<uint16_t>(v | static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i));
    }
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace seer
