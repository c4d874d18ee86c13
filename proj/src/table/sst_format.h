#pragma once

#include <cstdint>
#include <string>

#include "db/dbformat.h"

// On-disk SST layout (all integers little-endian):
//
//   data block*   entries [u32 ikey_len][u32 value_len][ikey][value]...
//                 trailer [u32 entry_count][u32 crc32(entries + count)]
//   index block   entries [u32 ikey_len][ikey = last key of block][u64 offset][u32 size]...
//                 trailer [u32 entry_count][u32 crc32(entries + count)]
//   meta block    [u32 len][smallest ikey][u32 len][largest ikey][u64 min_seqno][u64 max_seqno]
//   footer (48B)  [u64 index_offset][u64 index_size][u64 meta_offset][u64 meta_size]
//                 [u64 record_count][u32 checksum][4 bytes magic "AISL"]
//
// The footer checksum is crc32 over index block, meta block and the first 40
// footer bytes. Data blocks carry their own crc.
namespace alsm {

inline constexpr size_t kBlockTargetSize = 4096;
inline constexpr size_t kBlockTrailerSize = 8;
inline constexpr size_t kEntryHeaderSize = 8;
inline constexpr size_t kIndexEntryFixed = 4 + 8 + 4;
inline constexpr size_t kFooterSize = 48;
inline constexpr char kSstMagic[4] = {0x41, 0x49, 0x53, 0x4C};

std::string SstFileName(const std::string& dir, FileId id);

}  // namespace alsm
