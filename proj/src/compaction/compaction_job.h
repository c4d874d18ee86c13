#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "compaction/picker.h"
#include "compaction/schedule_log.h"
#include "io/io_engine.h"
#include "ledger/durability_ledger.h"
#include "table/sst_builder.h"
#include "version/version_set.h"

namespace alsm {

struct CompactionEnv {
  std::string dir;
  const EngineConfig* config = nullptr;
  io::IoEngine* io = nullptr;
  VersionSet* versions = nullptr;
  DurabilityLedger* ledger = nullptr;
  BufferPool* pool = nullptr;
  ScheduleLog* schedule = nullptr;
};

// Wall time of one job split by what its thread was doing.
struct PhaseTimes {
  std::chrono::nanoseconds compute{0};  // selection, merge, building, commit bookkeeping
  std::chrono::nanoseconds write{0};    // blocked on data writes
  std::chrono::nanoseconds fsync{0};    // blocked on fsync (output files or MANIFEST)

  std::chrono::nanoseconds total() const { return compute + write + fsync; }
  PhaseTimes& operator+=(const PhaseTimes& o) {
    compute += o.compute;
    write += o.write;
    fsync += o.fsync;
    return *this;
  }
};

struct CompactionStats {
  EpochId epoch;
  int level = 0;
  bool async = false;
  uint64_t input_files = 0;
  uint64_t output_files = 0;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  uint64_t records_out = 0;
  uint64_t buffers_submitted = 0;
  uint32_t fallback_waits = 0;
  PhaseTimes phases;
};

// Runs one compaction. With the sync backend every buffer write and every
// output fsync blocks, outputs are committed Durable and inputs deleted at
// once. Otherwise writes stay in flight while merging continues, the job
// blocks only until its writes land, the commit records outputs as Volatile
// together with a ledger entry, and one compound fsync over all outputs and
// the MANIFEST is left to complete in the background.
class CompactionJob {
 public:
  CompactionJob(const CompactionEnv& env, CompactionInputs inputs, EpochId epoch);
  ~CompactionJob();
  CompactionJob(const CompactionJob&) = delete;
  CompactionJob& operator=(const CompactionJob&) = delete;

  // Always releases the inputs' in-progress marks before returning.
  Status Run();
  const CompactionStats& stats() const { return stats_; }

 private:
  struct Output {
    SstMeta meta;
    std::shared_ptr<io::WritableFile> file;
  };

  bool async() const { return async_; }
  Status OpenOutput();
  Status FinishOutput();
  Status HarvestWrites(bool wait_all);
  Status CommitSync();
  Status CommitAsync();
  void Abort();
  void ReleaseLocked();

  CompactionEnv env_;
  CompactionInputs inputs_;
  const EpochId epoch_;
  const bool async_;
  CompactionStats stats_;

  io::CompletionQueue cq_;
  std::unique_ptr<SstBuilder> builder_;
  std::vector<Output> outputs_;
  std::vector<io::ReqId> inflight_writes_;
  // Writes of the open builder that a poll reaped before FinishOutput saw them.
  std::unordered_set<io::ReqId> reaped_early_;
  bool released_ = false;
};

}  // namespace alsm
