#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "io/io_engine.h"
#include "util/status.h"
#include "version/file_meta.h"
#include "version/version_edit.h"

namespace alsm {

enum class LedgerState : uint8_t { kPending, kDurable, kRetired };

const char* LedgerStateName(LedgerState s);

// One compaction epoch whose offspring were committed before their fsync batch
// completed. Parents stay on disk until the entry retires.
struct LedgerEntry {
  EpochId epoch;
  int output_level = 0;
  bool drop_tombstones = false;
  std::vector<SstMeta> parents;
  std::vector<SstMeta> offspring;
  std::vector<std::string> offspring_paths;                 // aligned with offspring
  std::vector<std::shared_ptr<io::WritableFile>> handles;  // open offspring, for retries
  io::ReqId batch_id = 0;
  LedgerState state = LedgerState::kPending;
  io::Clock::time_point opened_at;
  uint32_t fsync_attempts = 1;
  std::set<uint64_t> depends_on;  // epochs whose offspring are among the parents
};

enum class LedgerEventKind : uint8_t { kOpened, kBatchComplete, kFallbackWait, kRetry, kRebuilt, kRetired };

struct LedgerEvent {
  LedgerEventKind kind;
  EpochId epoch;
  io::Clock::time_point at;
};

// Side effects the ledger performs, injectable so schedules can be fuzzed
// without an engine behind it.
struct LedgerHooks {
  // Appends one unsynced MANIFEST record.
  std::function<Status(VersionEdit*)> log_edit;
  // Physically removes retired parents.
  std::function<Status(const std::vector<SstMeta>&)> delete_files;
  // Resubmits an fsync batch over the given offspring paths.
  std::function<Status(const LedgerEntry&, const std::vector<std::string>&, io::ReqId*)> resubmit;
  // Makes one failed batch member durable another way: an offspring is
  // rebuilt from the entry's parents, any other file is synced directly.
  std::function<Status(const LedgerEntry&, const std::string& path)> rebuild;
  // Blocks until the batch may have completed. Called without the ledger lock.
  std::function<void(io::ReqId)> wait;
  std::function<void(const char*)> crash_point;
  std::function<void(const LedgerEvent&)> on_event;
};

struct LedgerStats {
  uint64_t opened = 0;
  uint64_t retired = 0;
  uint64_t fallback_waits = 0;
  uint64_t fsync_retries = 0;
  uint64_t rebuilt_files = 0;
  uint64_t swept = 0;
};

struct CheckupResult {
  std::vector<EpochId> retired;
  uint32_t fallback_waits = 0;
  Status status;
};

struct LedgerEntryInfo {
  EpochId epoch;
  LedgerState state;
  int output_level;
  std::vector<FileId> parents;
  std::vector<FileId> offspring;
  double age_seconds;
};

class DurabilityLedger {
 public:
  DurabilityLedger(LedgerHooks hooks, uint32_t fsync_retry_limit);
  DurabilityLedger(const DurabilityLedger&) = delete;
  DurabilityLedger& operator=(const DurabilityLedger&) = delete;

  // Compound fsync batches must be submitted to this queue.
  io::CompletionQueue* completion_queue() { return &cq_; }

  // Starts tracking an entry whose ledger_open record is already logged.
  void Register(LedgerEntry entry);

  // Records a batch completion. Harvesting the queue feeds this too.
  void OnBatchComplete(io::ReqId id, Status status, std::vector<std::string> failed_paths,
                       io::Clock::time_point at);

  // Retires every epoch that produced one of `inputs` (and, first, the epochs
  // those depend on). Non-blocking mode skips epochs whose batch is still in
  // flight; blocking mode waits and counts each such wait as a fallback.
  CheckupResult Checkup(const std::vector<FileId>& inputs, bool blocking);

  // Blocking checkup of every entry opened at least max_age before `now`.
  CheckupResult Sweep(std::chrono::milliseconds max_age,
                      io::Clock::time_point now = io::Clock::now());

  // Blocking checkup of every entry (clean shutdown).
  CheckupResult RetireAll();

  bool IsVolatile(FileId id) const;
  size_t OpenCount() const;
  std::vector<LedgerEntryInfo> Dump() const;
  LedgerStats stats() const;

 private:
  struct Completion {
    Status status;
    std::vector<std::string> failed_paths;
    io::Clock::time_point at;
  };

  void HarvestLocked();
  Status RetireLocked(std::unique_lock<std::mutex>& lk, uint64_t epoch, bool blocking,
                      CheckupResult* result);
  Status ApplyCompletionLocked(LedgerEntry& e, Completion c);
  Status RetireDurableLocked(LedgerEntry& e);
  CheckupResult RetireEpochs(const std::vector<uint64_t>& epochs, bool blocking);
  void Emit(LedgerEventKind kind, EpochId epoch, io::Clock::time_point at) const;
  void Crash(const char* point) const;

  LedgerHooks hooks_;
  const uint32_t retry_limit_;
  io::CompletionQueue cq_;

  mutable std::mutex mu_;
  std::map<uint64_t, LedgerEntry> entries_;
  std::unordered_map<uint64_t, uint64_t> offspring_epoch_;  // file id -> epoch
  std::unordered_map<io::ReqId, Completion> completed_;
  LedgerStats stats_;
};

}  // namespace alsm
