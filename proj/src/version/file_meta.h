#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "db/dbformat.h"

namespace alsm {

class SstReader;

enum class Durability : uint8_t { kVolatile = 0, kDurable = 1 };

// Metadata of one on-disk sorted table. smallest/largest are encoded internal keys.
struct SstMeta {
  FileId file_id;
  int level = 0;
  std::string smallest;
  std::string largest;
  uint64_t file_size = 0;
  Durability durability = Durability::kDurable;
  EpochId birth_epoch;  // 0 for flushes
  uint32_t checksum = 0;
  uint64_t record_count = 0;
  SequenceNumber max_seqno = 0;

  std::string_view smallest_user_key() const { return ExtractUserKey(smallest); }
  std::string_view largest_user_key() const { return ExtractUserKey(largest); }

  friend bool operator==(const SstMeta&, const SstMeta&) = default;
};

// A live file inside a Version: metadata plus its open reader. Immutable; a
// durability change produces a new FileState sharing the reader.
struct FileState {
  SstMeta meta;
  std::shared_ptr<SstReader> reader;
};

using FileRef = std::shared_ptr<const FileState>;

}  // namespace alsm
