#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "compaction/compaction_job.h"
#include "compaction/schedule_log.h"
#include "db/config.h"
#include "io/file_system.h"
#include "io/io_engine.h"
#include "ledger/durability_ledger.h"
#include "ledger/recovery.h"
#include "memtable/memtable.h"
#include "memtable/wal.h"
#include "table/iterator.h"
#include "version/version_set.h"

namespace alsm {

enum class StallReason : uint8_t { kNone, kTooManyImmutables, kTooManyL0, kPendingCompactionBytes };

const char* StallReasonName(StallReason r);

struct EngineMetrics {
  uint64_t puts = 0;
  uint64_t deletes = 0;
  uint64_t gets = 0;
  uint64_t user_bytes = 0;  // key + value bytes accepted by put/delete
  uint64_t wal_bytes = 0;

  double stall_seconds = 0;
  uint64_t stall_events = 0;
  double stall_seconds_by_reason[4] = {0, 0, 0, 0};

  uint64_t flushes = 0;
  uint64_t flush_bytes = 0;
  PhaseTimes flush_phases;

  uint64_t compactions = 0;
  uint64_t compaction_errors = 0;
  uint64_t compaction_bytes_read = 0;
  uint64_t compaction_bytes_written = 0;
  uint64_t compaction_output_files = 0;
  uint64_t buffers_submitted = 0;
  uint64_t fallback_fsync_waits = 0;
  uint64_t compactions_with_fallback = 0;
  PhaseTimes compaction_phases;

  LedgerStats ledger;
  uint64_t ledger_open = 0;
  uint64_t pipelined_merges = 0;
  RecoveryReport recovery;

  // (flush + compaction bytes) / user bytes
  double WriteAmplification() const;
  std::string ToJson() const;
};

// The storage engine. Thread-safe; any number of foreground threads may call
// Put/Delete/Get concurrently with the background workers.
class DB {
 public:
  static Status Open(const EngineConfig& config, const std::string& dir, std::unique_ptr<DB>* out);
  ~DB();
  DB(const DB&) = delete;
  DB& operator=(const DB&) = delete;

  // Drains flushes and compactions, retires every ledger entry and stops the
  // background threads. Idempotent.
  Status Close();

  Status Put(std::string_view key, std::string_view value, SequenceNumber* seq = nullptr);
  Status Delete(std::string_view key, SequenceNumber* seq = nullptr);
  // NotFound when the key is absent or deleted.
  Status Get(std::string_view key, std::string* value);

  // Iterator over live user keys and values at the time of the call.
  std::unique_ptr<Iterator> NewIterator();

  // Rotates the current memtable and waits until it is flushed.
  Status Flush();
  // Waits until no flush or compaction is pending or running.
  Status WaitForIdle();

  CheckupResult LedgerSweep(std::chrono::milliseconds max_age);
  std::vector<LedgerEntryInfo> LedgerDump() const;

  EngineMetrics Metrics() const;
  // Named property, or empty optional if unknown.
  std::optional<std::string> GetProperty(std::string_view name) const;

  SequenceNumber LastSequence() const { return last_seq_.load(); }
  const EngineConfig& config() const { return config_; }
  const std::string& dir() const { return dir_; }
  io::IoEngine* io() const { return io_.get(); }
  VersionSet* versions() const { return versions_.get(); }
  DurabilityLedger* ledger() const { return ledger_.get(); }
  const ScheduleLog& schedule() const { return schedule_; }

 private:
  DB(const EngineConfig& config, std::string dir);

  Status Recover();
  Status ReplayWals(const std::vector<std::pair<uint64_t, std::string>>& wals);
  Status RemoveOrphans();
  Status NewWal();
  LedgerHooks MakeLedgerHooks();

  Status Write(ValueKind kind, std::string_view key, std::string_view value, SequenceNumber* seq);
  Status MakeRoomForWrite(std::unique_lock<std::mutex>& wl, uint64_t charge);
  StallReason CurrentStall() const;
  void RotateLocked();

  Status FlushMemTable(const std::shared_ptr<MemTable>& mem);
  void FlushWorker();
  void CompactionWorker();
  void SweepWorker();
  bool CompactionNeeded() const;
  void SetBackgroundError(const Status& s);

  const EngineConfig config_;
  const std::string dir_;
  io::FileSystem fs_;
  std::unique_ptr<io::IoEngine> io_;
  std::unique_ptr<VersionSet> versions_;
  std::unique_ptr<DurabilityLedger> ledger_;
  BufferPool pool_;
  ScheduleLog schedule_;

  // Foreground write lock: WAL append order equals seqno order.
  std::mutex write_mu_;
  std::condition_variable stall_cv_;
  std::unique_ptr<WalWriter> wal_;
  std::atomic<SequenceNumber> last_seq_{0};
  int stalled_writers_ = 0;
  io::Clock::time_point stall_start_;
  StallReason stall_reason_ = StallReason::kNone;

  // Guards the memtable pointers read by Get and iterators.
  mutable std::mutex mem_mu_;
  std::shared_ptr<MemTable> mem_;
  std::deque<std::shared_ptr<MemTable>> imms_;

  // Background coordination.
  mutable std::mutex bg_mu_;
  std::condition_variable bg_cv_;
  bool shutting_down_ = false;
  bool closed_ = false;
  int running_compactions_ = 0;
  bool flush_running_ = false;
  Status bg_error_;
  std::atomic<uint64_t> next_epoch_{1};

  mutable std::mutex metrics_mu_;
  EngineMetrics metrics_;

  std::thread flush_thread_;
  std::vector<std::thread> compaction_threads_;
  std::thread sweep_thread_;
};

}  // namespace alsm
