#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "version/file_meta.h"
#include "util/status.h"

namespace alsm {

// MANIFEST edit-entry types. Several entries form one atomic record.
enum class EditType : uint8_t {
  kAddFile = 1,
  kDeleteFile = 2,
  kMarkDurable = 3,
  kLedgerOpen = 4,
  kLedgerClose = 5,
  kSeqnoMark = 6,
};

// A compaction epoch whose offspring are not yet known to be durable.
// Parents carry full metadata so recovery can rebuild offspring from them.
struct LedgerOpenRecord {
  EpochId epoch;
  uint64_t fsync_batch_id = 0;
  int output_level = 0;
  // Whether the merge dropped tombstones; needed to rebuild identical offspring.
  bool drop_tombstones = false;
  std::vector<SstMeta> parents;
  std::vector<FileId> offspring;

  friend bool operator==(const LedgerOpenRecord&, const LedgerOpenRecord&) = default;
};

struct DeletedFile {
  int level = 0;
  FileId file_id;
  friend bool operator==(const DeletedFile&, const DeletedFile&) = default;
};

struct VersionEdit {
  std::vector<DeletedFile> deleted;
  std::vector<SstMeta> added;
  std::vector<FileId> marked_durable;
  std::vector<LedgerOpenRecord> ledger_opened;
  std::vector<EpochId> ledger_closed;
  std::optional<SequenceNumber> last_seqno;
  std::optional<uint64_t> next_file_id;

  bool empty() const {
    return deleted.empty() && added.empty() && marked_durable.empty() &&
           ledger_opened.empty() && ledger_closed.empty() && !last_seqno && !next_file_id;
  }

  // Payload of one MANIFEST record (without length prefix or crc).
  void EncodeTo(std::string* dst) const;
  Status DecodeFrom(std::string_view src);

  friend bool operator==(const VersionEdit&, const VersionEdit&) = default;
};

void EncodeSstMeta(const SstMeta& m, std::string* dst);

// Frames a payload as a MANIFEST record: [u32 len][payload][u32 crc32(payload)].
void AppendManifestRecord(std::string_view payload, std::string* dst);

struct ManifestReadResult {
  std::vector<VersionEdit> edits;
  bool torn_tail = false;  // stopped at an incomplete or corrupt record
};

// Decodes records until the first invalid one.
ManifestReadResult ReadManifestRecords(std::string_view data);

}  // namespace alsm
