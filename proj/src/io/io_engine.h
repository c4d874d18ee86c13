#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "db/config.h"
#include "io/file_system.h"
#include "util/status.h"

namespace alsm::io {

using Clock = std::chrono::steady_clock;
using ReqId = uint64_t;

enum class IoOp : uint8_t { kWrite, kFsync, kFsyncBatch };

struct IoRequest {
  IoOp op = IoOp::kWrite;
  std::shared_ptr<WritableFile> file;                // kWrite, kFsync
  uint64_t offset = 0;                               // kWrite
  std::string buffer;                                // kWrite; engine-owned until completion
  std::vector<std::shared_ptr<WritableFile>> files;  // kFsyncBatch
  ReqId reserved_id = 0;                             // from IoEngine::ReserveId(), or 0

  static IoRequest Write(std::shared_ptr<WritableFile> f, uint64_t offset, std::string buf) {
    IoRequest r;
    r.op = IoOp::kWrite;
    r.file = std::move(f);
    r.offset = offset;
    r.buffer = std::move(buf);
    return r;
  }
  static IoRequest Fsync(std::shared_ptr<WritableFile> f) {
    IoRequest r;
    r.op = IoOp::kFsync;
    r.file = std::move(f);
    return r;
  }
  // Indivisible: its completion implies every member file is durable.
  static IoRequest FsyncBatch(std::vector<std::shared_ptr<WritableFile>> fs) {
    IoRequest r;
    r.op = IoOp::kFsyncBatch;
    r.files = std::move(fs);
    return r;
  }
};

struct CompletionEvent {
  ReqId id = 0;
  IoOp op = IoOp::kWrite;
  Status status;
  Clock::time_point submit_time;
  Clock::time_point complete_time;
  std::string buffer;                     // the write buffer, handed back for reuse
  std::vector<std::string> failed_paths;  // fsync members that failed
};

struct WaitResult {
  std::vector<CompletionEvent> events;
  bool complete = true;  // false when the timeout expired first
};

// Per-consumer completion ring. Each event is delivered exactly once, either
// through Poll() or WaitAll(). One consumer thread per queue.
class CompletionQueue {
 public:
  CompletionQueue() = default;
  CompletionQueue(const CompletionQueue&) = delete;
  CompletionQueue& operator=(const CompletionQueue&) = delete;

  // Non-blocking harvest of everything completed so far.
  std::vector<CompletionEvent> Poll();

  // Blocks until every listed request has completed or the timeout expires.
  // Delivered events are removed from the queue. With spin=true the caller
  // busy-polls instead of sleeping on a condition variable.
  WaitResult WaitAll(std::span<const ReqId> ids, std::chrono::microseconds timeout,
                     bool spin = false);

  // Blocks until at least one undelivered event exists. Returns false on timeout.
  bool WaitAny(std::chrono::microseconds timeout);

  size_t pending() const;

 private:
  friend class IoEngine;
  void Push(CompletionEvent ev);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<CompletionEvent> ready_;
};

struct LatencyModel {
  uint64_t write_us_per_mib = 0;
  uint64_t fsync_us = 0;

  std::chrono::microseconds WriteCost(size_t bytes) const {
    return std::chrono::microseconds(
        static_cast<int64_t>((static_cast<unsigned __int128>(bytes) * write_us_per_mib) >> 20));
  }
  std::chrono::microseconds FsyncCost() const {
    return std::chrono::microseconds(static_cast<int64_t>(fsync_us));
  }
};

struct IoEngineOptions {
  IoBackend backend = IoBackend::kAsync;
  LatencyModel latency;
  bool real_fsync = true;
  bool direct_poll = false;
  uint32_t queue_depth = 4096;
  uint32_t async_threads = 2;

  static IoEngineOptions FromConfig(const EngineConfig& c) {
    IoEngineOptions o;
    o.backend = c.io_backend;
    o.latency = {c.sim_write_latency_us_per_mib, c.sim_fsync_latency_us};
    o.real_fsync = c.real_fsync;
    o.direct_poll = c.direct_io_poll;
    o.queue_depth = c.io_queue_depth;
    o.async_threads = c.io_async_threads;
    return o;
  }
};

struct IoStats {
  uint64_t submitted = 0;
  uint64_t completed = 0;
  uint64_t bytes_written = 0;
  uint64_t fsyncs = 0;
};

// Submission/completion engine over three interchangeable backends:
//   sync - the request runs (and pays its latency) inside Submit();
//   async - a worker pool runs requests; completion is pushed when done;
//   sim - writes run inline, completion (and, for fsync, durability) is
//         delivered by a timer thread once the modelled latency elapses.
// Final file contents are identical across backends; only timing differs.
class IoEngine {
 public:
  IoEngine(FileSystem* fs, IoEngineOptions options);
  ~IoEngine();
  IoEngine(const IoEngine&) = delete;
  IoEngine& operator=(const IoEngine&) = delete;

  // Returns Busy when queue_depth requests are in flight; the caller must
  // drain its completion queue and retry. The request is consumed only on
  // success.
  Status Submit(IoRequest&& req, CompletionQueue* cq, ReqId* id);

  // Hands out a request id ahead of submission, for callers that must record
  // the id durably before the request exists (set IoRequest::reserved_id).
  ReqId ReserveId() { return next_id_.fetch_add(1); }

  WaitResult WaitAll(CompletionQueue& cq, std::span<const ReqId> ids,
                     std::chrono::microseconds timeout = std::chrono::hours(24)) const {
    return cq.WaitAll(ids, timeout, options_.direct_poll);
  }

  // Fails with Busy while requests are in flight.
  Status SetBackend(IoBackend backend, LatencyModel latency);

  // Blocking fsync outside the queues (WAL, MANIFEST). Pays the fsync latency.
  Status SyncNow(WritableFile& f);
  // Blocking write outside the queues. Pays the write latency.
  Status WriteNow(WritableFile& f, std::string_view data);

  // The next n fsync operations (single or batch member) fail with EIO.
  void InjectFsyncFailures(uint32_t n) { fsync_failures_.store(n); }
  // The next n queued writes fail with EIO without touching the file.
  void InjectWriteFailures(uint32_t n) { write_failures_.store(n); }

  uint64_t InFlight() const { return in_flight_.load(); }
  IoStats stats() const;
  IoBackend backend() const;
  const IoEngineOptions& options() const { return options_; }
  FileSystem* fs() const { return fs_; }

 private:
  struct Task {
    ReqId id;
    IoRequest req;
    CompletionQueue* cq;
    Clock::time_point submit_time;
  };
  struct Timed {
    Clock::time_point due;
    uint64_t seq;
    std::shared_ptr<Task> task;
    bool execute_at_due;  // fsyncs take effect when their latency elapses
    Status status;        // result of an inline-executed write
    bool operator>(const Timed& o) const {
      return due != o.due ? due > o.due : seq > o.seq;
    }
  };

  Status ExecuteFsyncOne(WritableFile& f);
  Status Execute(IoRequest& req, std::vector<std::string>* failed);
  std::chrono::microseconds Cost(const IoRequest& req) const;
  void Complete(Task& task, Status status, std::vector<std::string> failed);
  void WorkerLoop();
  void TimerLoop();
  void NoteWriteStart(const WritableFile* f);
  void NoteWriteDone(const WritableFile* f);
  bool RunnableLocked(const Task& task) const;

  FileSystem* const fs_;
  IoEngineOptions options_;

  std::atomic<uint64_t> next_id_{1};
  std::atomic<uint64_t> in_flight_{0};
  std::atomic<uint32_t> fsync_failures_{0};
  std::atomic<uint32_t> write_failures_{0};

  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable timer_cv_;
  std::condition_variable drain_cv_;
  std::deque<std::shared_ptr<Task>> work_;
  std::priority_queue<Timed, std::vector<Timed>, std::greater<>> timers_;
  uint64_t timer_seq_ = 0;
  std::unordered_map<const WritableFile*, uint32_t> writes_in_flight_;
  std::unordered_map<const WritableFile*, Clock::time_point> last_write_due_;
  bool stop_ = false;
  IoStats stats_;

  std::vector<std::thread> workers_;
  std::thread timer_;
};

}  // namespace alsm::io
