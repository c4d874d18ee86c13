#include "compaction/schedule_log.h"

#include <algorithm>
#include <limits>
#include <map>

#include <json.hpp>

namespace alsm {

const char* ScheduleEventName(ScheduleEventKind k) {
  switch (k) {
    case ScheduleEventKind::kMergeStart:
      return "merge_start";
    case ScheduleEventKind::kWritesComplete:
      return "writes_complete";
    case ScheduleEventKind::kLedgerOpen:
      return "ledger_open";
    case ScheduleEventKind::kFsyncSubmitted:
      return "fsync_submitted";
    case ScheduleEventKind::kBatchComplete:
      return "batch_complete";
    case ScheduleEventKind::kFallbackWait:
      return "fallback_wait";
    case ScheduleEventKind::kRetired:
      return "retired";
    case ScheduleEventKind::kAborted:
      return "aborted";
  }
  return "?";
}

ScheduleLog::ScheduleLog(size_t capacity) : origin_(io::Clock::now()), capacity_(capacity) {}

void ScheduleLog::Record(ScheduleEventKind kind, uint64_t epoch, io::Clock::time_point at) {
  const double t = std::chrono::duration<double, std::milli>(at - origin_).count();
  std::lock_guard l(mu_);
  if (events_.size() < capacity_) events_.push_back({kind, epoch, t});
}

std::vector<ScheduleEvent> ScheduleLog::Events() const {
  std::lock_guard l(mu_);
  return events_;
}

std::string ScheduleLog::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : Events()) {
    arr.push_back({{"t_ms", e.t_ms}, {"epoch", e.epoch}, {"event", ScheduleEventName(e.kind)}});
  }
  return arr.dump();
}

uint64_t ScheduleLog::CountPipelinedMerges(const std::vector<ScheduleEvent>& events) {
  struct Window {
    double submitted = std::numeric_limits<double>::infinity();
    double completed = std::numeric_limits<double>::infinity();
  };
  std::map<uint64_t, Window> batches;
  for (const auto& e : events) {
    if (e.kind == ScheduleEventKind::kFsyncSubmitted) {
      batches[e.epoch].submitted = std::min(batches[e.epoch].submitted, e.t_ms);
    } else if (e.kind == ScheduleEventKind::kBatchComplete) {
      batches[e.epoch].completed = e.t_ms;
    }
  }
  uint64_t count = 0;
  for (const auto& e : events) {
    if (e.kind != ScheduleEventKind::kMergeStart) continue;
    for (const auto& [epoch, w] : batches) {
      if (epoch != e.epoch && w.submitted <= e.t_ms && e.t_ms < w.completed) {
        ++count;
        break;
      }
    }
  }
  return count;
}

}  // namespace alsm
