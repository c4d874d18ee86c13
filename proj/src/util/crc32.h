#pragma once

#include <cstdint>
#include <string_view>

namespace alsm::crc32 {

// Standard CRC-32 (IEEE 802.3 polynomial), as computed by zlib.
uint32_t Value(const char* data, size_t n);
uint32_t Extend(uint32_t crc, const char* data, size_t n);

inline uint32_t Value(std::string_view s) { return Value(s.data(), s.size()); }

}  // namespace alsm::crc32
