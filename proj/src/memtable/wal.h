#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "db/dbformat.h"
#include "io/io_engine.h"
#include "util/status.h"

namespace alsm {

// Record layout, little-endian:
//   [len u32][crc u32][seqno u64][kind u8][klen u32][vlen u32][key][value]
// len counts the bytes after the crc field; crc covers exactly those bytes.
inline constexpr size_t kWalHeaderSize = 8;
inline constexpr size_t kWalBodyFixedSize = 8 + 1 + 4 + 4;

struct WalRecord {
  SequenceNumber seqno = 0;
  ValueKind kind = ValueKind::kPut;
  std::string_view user_key;
  std::string_view value;
};

void EncodeWalRecord(const WalRecord& rec, std::string* dst);

std::string WalFileName(const std::string& dir, FileId segment);

class WalWriter {
 public:
  WalWriter(io::IoEngine* io, FileId segment, std::shared_ptr<io::WritableFile> file)
      : io_(io), segment_(segment), file_(std::move(file)) {}

  static Status Create(io::IoEngine* io, const std::string& dir, FileId segment,
                       std::unique_ptr<WalWriter>* out);

  // Appends one record; with sync=true the record is durable on return.
  Status Append(const WalRecord& rec, bool sync);
  Status Sync();
  Status Close();

  FileId segment() const { return segment_; }
  uint64_t size() const { return size_; }

 private:
  io::IoEngine* io_;
  FileId segment_;
  std::shared_ptr<io::WritableFile> file_;
  std::string scratch_;
  uint64_t size_ = 0;
};

struct WalReplayStats {
  uint64_t records = 0;
  bool torn_tail = false;  // replay stopped at a bad or truncated record
};

// Replays a WAL segment in order, stopping at the first torn or corrupt
// record or at a seqno that does not increase.
Status ReplayWal(const std::string& data,
                 const std::function<void(const WalRecord&)>& fn, WalReplayStats* stats);

}  // namespace alsm
