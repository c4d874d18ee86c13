#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "db/dbformat.h"
#include "table/iterator.h"
#include "util/status.h"

namespace alsm {

// Immutable, thread-safe reader over one SST file. The index and meta blocks
// are held in memory; data blocks are read with pread on demand.
class SstReader : public std::enable_shared_from_this<SstReader> {
 public:
  ~SstReader();
  SstReader(const SstReader&) = delete;
  SstReader& operator=(const SstReader&) = delete;

  // Fails with Corruption when the footer or index checksum does not verify.
  static Status Open(const std::string& path, std::shared_ptr<SstReader>* out);

  // Newest record for user_key with seqno <= snapshot. NotFound if absent;
  // *deleted reports a tombstone.
  Status Get(std::string_view user_key, SequenceNumber snapshot, std::string* value,
             bool* deleted) const;

  // readahead > 0 reads that many bytes at a time (sequential scans).
  std::unique_ptr<Iterator> NewIterator(size_t readahead = 0) const;

  // Reads every data block and checks its crc plus entry ordering.
  Status VerifyContents() const;

  const std::string& path() const { return path_; }
  const std::string& smallest() const { return smallest_; }
  const std::string& largest() const { return largest_; }
  uint64_t record_count() const { return record_count_; }
  uint64_t file_size() const { return file_size_; }
  uint32_t checksum() const { return checksum_; }
  SequenceNumber min_seqno() const { return min_seqno_; }
  SequenceNumber max_seqno() const { return max_seqno_; }

 private:
  struct IndexEntry {
    std::string last_key;
    uint64_t offset;
    uint32_t size;
  };
  class TableIterator;

  SstReader() = default;
  Status ReadAt(uint64_t offset, size_t n, std::string* out) const;
  // Index of the first block whose last key >= target, or blocks_.size().
  size_t FindBlock(std::string_view target) const;

  std::string path_;
  int fd_ = -1;
  uint64_t file_size_ = 0;
  uint64_t record_count_ = 0;
  uint32_t checksum_ = 0;
  std::string smallest_;
  std::string largest_;
  SequenceNumber min_seqno_ = 0;
  SequenceNumber max_seqno_ = 0;
  std::vector<IndexEntry> blocks_;
};

// Parses and checks one data block held in `block` (including trailer).
// Fills offsets of each entry.
Status ParseBlock(std::string_view block, std::vector<uint32_t>* entry_offsets);

}  // namespace alsm
