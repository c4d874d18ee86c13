#include "util/crc32.h"

#include <zlib.h>

namespace alsm::crc32 {

uint32_t Extend(uint32_t crc, const char* data, size_t n) {
  // zlib takes uInt lengths; feed large inputs in slices.
  while (n > 0) {
    const uInt chunk = n > (1u << 30) ? (1u << 30) : static_cast<uInt>(n);
    crc = static_cast<uint32_t>(
        ::crc32(crc, reinterpret_cast<const Bytef*>(data), chunk));
    data += chunk;
    n -= chunk;
  }
  return crc;
}

uint32_t Value(const char* data, size_t n) { return Extend(0, data, n); }

}  // namespace alsm::crc32
