#pragma once

#include <cstddef>
#include <cstdint>

namespace seer {

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320). Pass the previous value
// to checksum in chunks.
uint32_t crc32(const void* data, size_t len, uint32_t crc = 0);

}  // namespace seer
