#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "io/io_engine.h"

namespace alsm {

enum class ScheduleEventKind : uint8_t {
  kMergeStart,
  kWritesComplete,
  kLedgerOpen,
  kFsyncSubmitted,
  kBatchComplete,
  kFallbackWait,
  kRetired,
  kAborted,
};

const char* ScheduleEventName(ScheduleEventKind k);

struct ScheduleEvent {
  ScheduleEventKind kind;
  uint64_t epoch;
  double t_ms;  // since the log was created
};

// Timeline of compaction and ledger events, kept for pipelining analysis.
class ScheduleLog {
 public:
  explicit ScheduleLog(size_t capacity = 1 << 20);

  void Record(ScheduleEventKind kind, uint64_t epoch, io::Clock::time_point at = io::Clock::now());
  std::vector<ScheduleEvent> Events() const;
  std::string ToJson() const;

  // Number of merge starts that happened while an earlier epoch's fsync batch
  // had been submitted but had not completed yet.
  static uint64_t CountPipelinedMerges(const std::vector<ScheduleEvent>& events);

 private:
  const io::Clock::time_point origin_;
  const size_t capacity_;
  mutable std::mutex mu_;
  std::vector<ScheduleEvent> events_;
};

}  // namespace alsm
