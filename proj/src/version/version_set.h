#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "db/config.h"
#include "io/io_engine.h"
#include "version/file_meta.h"
#include "version/version_edit.h"

namespace alsm {

// User-key interval [lo, hi] an in-flight compaction writes into.
struct KeyRange {
  uint64_t epoch = 0;
  int output_level = 0;
  std::string lo;
  std::string hi;
};

// Immutable snapshot of the live SST set. Level 0 is ordered newest first;
// levels >= 1 are ordered by smallest key and must not overlap.
class Version {
 public:
  const std::vector<FileRef>& files(int level) const { return levels_[level]; }
  int NumFiles(int level) const { return static_cast<int>(levels_[level].size()); }
  uint64_t LevelBytes(int level) const;
  uint64_t TotalFiles() const;

  // Newest record for user_key visible at snapshot. NotFound when absent.
  Status Get(std::string_view user_key, SequenceNumber snapshot, std::string* value,
             bool* deleted) const;

  // Files at `level` whose user-key range intersects [lo, hi].
  std::vector<FileRef> Overlapping(int level, std::string_view lo, std::string_view hi) const;

  // Checks level ordering and pairwise disjointness at levels >= 1.
  Status CheckInvariants() const;

  // Flat list of (level, meta) for comparisons and dumps.
  std::vector<SstMeta> AllMetas() const;

  FileRef Find(FileId id) const;

 private:
  friend class VersionSet;
  std::array<std::vector<FileRef>, kNumLevels> levels_;
};

using VersionRef = std::shared_ptr<const Version>;

// Level contents replayed from a MANIFEST, without open readers.
struct ReplayedState {
  std::array<std::map<uint64_t, SstMeta>, kNumLevels> levels;
  std::map<uint64_t, LedgerOpenRecord> open_entries;  // by epoch
  SequenceNumber last_seqno = 0;
  uint64_t next_file_id = 1;
  uint64_t max_epoch = 0;
  uint64_t records = 0;
  bool torn_tail = false;

  Status Apply(const VersionEdit& edit);
  std::vector<SstMeta> AllMetas() const;
};

// Replays a MANIFEST image from empty state.
Status ReplayManifest(std::string_view data, ReplayedState* out);

std::string ManifestFileName(const std::string& dir);

// Owns the current Version, the MANIFEST and file-id allocation. All
// mutations go through LogAndApply under the engine-wide version lock.
class VersionSet {
 public:
  VersionSet(std::string dir, const EngineConfig& config, io::IoEngine* io);
  VersionSet(const VersionSet&) = delete;
  VersionSet& operator=(const VersionSet&) = delete;

  // Reads the MANIFEST (if any) into replayed state. No readers are opened
  // yet so that ledger resolution can fix up offspring first.
  Status Recover(ReplayedState* state);

  // Opens readers for every file in `state`, installs it as current and
  // rewrites the MANIFEST as a single snapshot record.
  Status Install(const ReplayedState& state);

  // Appends the edit (one atomic record) and installs the resulting version.
  // With sync=true the record is durable on return.
  Status LogAndApply(VersionEdit* edit, bool sync);

  VersionRef current() const;
  FileId NewFileId() { return FileId{next_file_id_.fetch_add(1)}; }
  uint64_t PeekNextFileId() const { return next_file_id_.load(); }
  SequenceNumber last_seqno() const { return last_seqno_.load(std::memory_order_acquire); }
  void SetLastSeqno(SequenceNumber s) { last_seqno_.store(s, std::memory_order_release); }

  // Persisted view of open ledger entries (mirrors ledger_open/close records).
  std::map<uint64_t, LedgerOpenRecord> OpenLedgerEntries() const;

  // Engine-wide version lock: guards compaction selection bookkeeping.
  // LogAndApply does not take it, so callers may hold it across a commit.
  std::mutex& mutex() { return mu_; }
  std::set<uint64_t>& being_compacted() { return being_compacted_; }
  std::array<std::string, kNumLevels>& compact_pointer() { return compact_pointer_; }
  std::vector<KeyRange>& inflight() { return inflight_; }

  // The open MANIFEST, so a compound fsync can cover freshly appended records.
  std::shared_ptr<io::WritableFile> manifest_file() const;

  const std::string& dir() const { return dir_; }
  const EngineConfig& config() const { return config_; }
  uint64_t manifest_records() const { return manifest_records_; }

 private:
  Status ApplyLocked(const VersionEdit& edit,
                     const std::map<uint64_t, std::shared_ptr<SstReader>>& readers);
  Status OpenManifestForAppend();

  const std::string dir_;
  const EngineConfig config_;
  io::IoEngine* const io_;

  std::mutex mu_;
  mutable std::mutex current_mu_;
  mutable std::mutex manifest_mu_;  // serializes edits; guards the fields below
  VersionRef current_;
  std::map<uint64_t, LedgerOpenRecord> open_entries_;
  std::shared_ptr<io::WritableFile> manifest_;
  uint64_t manifest_size_ = 0;
  uint64_t manifest_records_ = 0;
  std::atomic<uint64_t> next_file_id_{1};
  std::atomic<SequenceNumber> last_seqno_{0};
  std::set<uint64_t> being_compacted_;
  std::array<std::string, kNumLevels> compact_pointer_;
  std::vector<KeyRange> inflight_;
};

}  // namespace alsm
