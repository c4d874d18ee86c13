#include "io/io_engine.h"

#include <algorithm>

namespace alsm::io {

// ---------------------------------------------------------------------------
// CompletionQueue

void CompletionQueue::Push(CompletionEvent ev) {
  {
    std::lock_guard l(mu_);
    ready_.push_back(std::move(ev));
  }
  cv_.notify_all();
}

std::vector<CompletionEvent> CompletionQueue::Poll() {
  std::lock_guard l(mu_);
  std::vector<CompletionEvent> out(std::make_move_iterator(ready_.begin()),
                                   std::make_move_iterator(ready_.end()));
  ready_.clear();
  return out;
}

size_t CompletionQueue::pending() const {
  std::lock_guard l(mu_);
  return ready_.size();
}

WaitResult CompletionQueue::WaitAll(std::span<const ReqId> ids,
                                    std::chrono::microseconds timeout, bool spin) {
  WaitResult result;
  std::vector<ReqId> remaining(ids.begin(), ids.end());
  const auto deadline = Clock::now() + timeout;
  std::unique_lock l(mu_);
  while (true) {
    for (auto it = ready_.begin(); it != ready_.end();) {
      auto pos = std::find(remaining.begin(), remaining.end(), it->id);
      if (pos != remaining.end()) {
        remaining.erase(pos);
        result.events.push_back(std::move(*it));
        it = ready_.erase(it);
      } else {
        ++it;
      }
    }
    if (remaining.empty()) return result;
    if (Clock::now() >= deadline) {
      result.complete = false;
      return result;
    }
    if (spin) {
      l.unlock();
      std::this_thread::yield();
      l.lock();
    } else {
      cv_.wait_until(l, deadline);
    }
  }
}

bool CompletionQueue::WaitAny(std::chrono::microseconds timeout) {
  std::unique_lock l(mu_);
  return cv_.wait_for(l, timeout, [&] { return !ready_.empty(); });
}

// ---------------------------------------------------------------------------
// IoEngine

IoEngine::IoEngine(FileSystem* fs, IoEngineOptions options)
    : fs_(fs), options_(options) {
  for (uint32_t i = 0; i < options_.async_threads; ++i) {
    workers_.emplace_back([this] { WorkerLoop(); });
  }
  timer_ = std::thread([this] { TimerLoop(); });
}

IoEngine::~IoEngine() {
  {
    std::unique_lock l(mu_);
    drain_cv_.wait(l, [&] { return in_flight_.load() == 0; });
    stop_ = true;
  }
  work_cv_.notify_all();
  timer_cv_.notify_all();
  for (auto& t : workers_) t.join();
  timer_.join();
}

IoBackend IoEngine::backend() const {
  std::lock_guard l(mu_);
  return options_.backend;
}

IoStats IoEngine::stats() const {
  std::lock_guard l(mu_);
  return stats_;
}

Status IoEngine::SetBackend(IoBackend backend, LatencyModel latency) {
  std::lock_guard l(mu_);
  if (in_flight_.load() != 0) return Status::Busy("requests in flight");
  options_.backend = backend;
  options_.latency = latency;
  return Status::OK();
}

std::chrono::microseconds IoEngine::Cost(const IoRequest& req) const {
  switch (req.op) {
    case IoOp::kWrite: return options_.latency.WriteCost(req.buffer.size());
    // A compound batch is a single device request.
    case IoOp::kFsync:
    case IoOp::kFsyncBatch: return options_.latency.FsyncCost();
  }
  return {};
}

namespace {

bool TakeInjectedFailure(std::atomic<uint32_t>& budget) {
  uint32_t n = budget.load();
  while (n > 0) {
    if (budget.compare_exchange_weak(n, n - 1)) return true;
  }
  return false;
}

}  // namespace

Status IoEngine::ExecuteFsyncOne(WritableFile& f) {
  if (TakeInjectedFailure(fsync_failures_)) {
    return Status::IOError("injected fsync failure on " + f.path());
  }
  if (f.closed()) return Status::IOError("fsync of closed file " + f.path());
  Status s = fs_->Sync(f, options_.real_fsync);
  std::lock_guard l(mu_);
  ++stats_.fsyncs;
  return s;
}

Status IoEngine::Execute(IoRequest& req, std::vector<std::string>* failed) {
  switch (req.op) {
    case IoOp::kWrite: {
      if (TakeInjectedFailure(write_failures_)) {
        return Status::IOError("injected write failure on " + req.file->path());
      }
      Status s = fs_->Write(*req.file, req.offset, req.buffer);
      if (s.ok()) {
        std::lock_guard l(mu_);
        stats_.bytes_written += req.buffer.size();
      }
      return s;
    }
    case IoOp::kFsync: {
      Status s = ExecuteFsyncOne(*req.file);
      if (!s.ok()) failed->push_back(req.file->path());
      return s;
    }
    case IoOp::kFsyncBatch: {
      Status first;
      for (auto& f : req.files) {
        Status s = ExecuteFsyncOne(*f);
        if (!s.ok()) {
          failed->push_back(f->path());
          if (first.ok()) first = s;
        }
      }
      return first;
    }
  }
  return Status::InvalidArgument("unknown op");
}

void IoEngine::Complete(Task& task, Status status, std::vector<std::string> failed) {
  CompletionEvent ev;
  ev.id = task.id;
  ev.op = task.req.op;
  ev.status = std::move(status);
  ev.submit_time = task.submit_time;
  ev.complete_time = Clock::now();
  ev.buffer = std::move(task.req.buffer);
  ev.failed_paths = std::move(failed);
  // Drop file references before delivery so a consumer may close them.
  task.req.file.reset();
  task.req.files.clear();
  {
    std::lock_guard l(mu_);
    ++stats_.completed;
  }
  task.cq->Push(std::move(ev));
  {
    std::lock_guard l(mu_);
    in_flight_.fetch_sub(1);
  }
  drain_cv_.notify_all();
}

void IoEngine::NoteWriteStart(const WritableFile* f) {
  std::lock_guard l(mu_);
  ++writes_in_flight_[f];
}

void IoEngine::NoteWriteDone(const WritableFile* f) {
  bool drained = false;
  {
    std::lock_guard l(mu_);
    auto it = writes_in_flight_.find(f);
    if (it != writes_in_flight_.end() && --it->second == 0) {
      writes_in_flight_.erase(it);
      drained = true;
    }
  }
  if (drained) work_cv_.notify_all();
}

Status IoEngine::Submit(IoRequest&& req, CompletionQueue* cq, ReqId* id) {
  if (req.op == IoOp::kWrite || req.op == IoOp::kFsync) {
    if (!req.file) return Status::InvalidArgument("request without file");
  }
  if (in_flight_.load() >= options_.queue_depth) return Status::Busy("submission queue full");

  auto task = std::make_shared<Task>();
  task->id = req.reserved_id != 0 ? req.reserved_id : next_id_.fetch_add(1);
  task->req = std::move(req);
  task->cq = cq;
  task->submit_time = Clock::now();
  *id = task->id;

  IoBackend backend;
  {
    std::lock_guard l(mu_);
    backend = options_.backend;
    ++stats_.submitted;
    in_flight_.fetch_add(1);
  }

  switch (backend) {
    case IoBackend::kSync: {
      std::vector<std::string> failed;
      const auto cost = Cost(task->req);
      Status s = Execute(task->req, &failed);
      if (cost.count() > 0) std::this_thread::sleep_until(task->submit_time + cost);
      Complete(*task, std::move(s), std::move(failed));
      break;
    }
    case IoBackend::kAsync: {
      if (task->req.op == IoOp::kWrite) NoteWriteStart(task->req.file.get());
      {
        std::lock_guard l(mu_);
        work_.push_back(std::move(task));
      }
      work_cv_.notify_one();
      break;
    }
    case IoBackend::kSimulated: {
      Timed t;
      t.seq = 0;
      const auto cost = Cost(task->req);
      if (task->req.op == IoOp::kWrite) {
        std::vector<std::string> failed;
        t.status = Execute(task->req, &failed);
        t.execute_at_due = false;
        t.due = task->submit_time + cost;
      } else {
        t.execute_at_due = true;
        // Never complete a sync before the writes it covers.
        Clock::time_point after = task->submit_time;
        std::lock_guard l(mu_);
        auto consider = [&](const WritableFile* f) {
          if (auto it = last_write_due_.find(f); it != last_write_due_.end()) {
            after = std::max(after, it->second);
          }
        };
        if (task->req.file) consider(task->req.file.get());
        for (auto& f : task->req.files) consider(f.get());
        t.due = after + cost;
      }
      t.task = std::move(task);
      {
        std::lock_guard l(mu_);
        if (t.task->req.op == IoOp::kWrite) {
          auto& due = last_write_due_[t.task->req.file.get()];
          due = std::max(due, t.due);
        }
        t.seq = timer_seq_++;
        timers_.push(std::move(t));
      }
      timer_cv_.notify_all();
      break;
    }
  }
  return Status::OK();
}

bool IoEngine::RunnableLocked(const Task& task) const {
  if (task.req.op == IoOp::kWrite) return true;
  auto busy = [&](const WritableFile* f) { return writes_in_flight_.count(f) > 0; };
  if (task.req.file && busy(task.req.file.get())) return false;
  return std::none_of(task.req.files.begin(), task.req.files.end(),
                      [&](const auto& f) { return busy(f.get()); });
}

void IoEngine::WorkerLoop() {
  std::unique_lock l(mu_);
  while (true) {
    // A sync waits in the queue, not on a worker, until the writes to its
    // files drain; otherwise every worker could block behind queued writes.
    auto pick = work_.end();
    work_cv_.wait(l, [&] {
      pick = std::find_if(work_.begin(), work_.end(),
                          [&](const auto& t) { return RunnableLocked(*t); });
      return pick != work_.end() || (stop_ && work_.empty());
    });
    if (pick == work_.end()) return;
    auto task = std::move(*pick);
    work_.erase(pick);
    l.unlock();

    std::vector<std::string> failed;
    const auto start = Clock::now();
    const auto cost = Cost(task->req);
    Status s = Execute(task->req, &failed);
    if (cost.count() > 0) std::this_thread::sleep_until(start + cost);
    const WritableFile* written = task->req.op == IoOp::kWrite ? task->req.file.get() : nullptr;
    Complete(*task, std::move(s), std::move(failed));
    if (written != nullptr) NoteWriteDone(written);

    l.lock();
  }
}

void IoEngine::TimerLoop() {
  std::unique_lock l(mu_);
  while (true) {
    if (timers_.empty()) {
      if (stop_) return;
      timer_cv_.wait(l);
      continue;
    }
    const auto due = timers_.top().due;
    if (Clock::now() < due) {
      timer_cv_.wait_until(l, due);
      continue;
    }
    Timed t = timers_.top();
    timers_.pop();
    if (t.task->req.op == IoOp::kWrite) {
      auto it = last_write_due_.find(t.task->req.file.get());
      if (it != last_write_due_.end() && it->second <= t.due) last_write_due_.erase(it);
    }
    l.unlock();
    std::vector<std::string> failed;
    Status s = t.execute_at_due ? Execute(t.task->req, &failed) : t.status;
    Complete(*t.task, std::move(s), std::move(failed));
    l.lock();
  }
}

Status IoEngine::SyncNow(WritableFile& f) {
  const auto start = Clock::now();
  Status s = ExecuteFsyncOne(f);
  const auto cost = options_.latency.FsyncCost();
  if (cost.count() > 0) std::this_thread::sleep_until(start + cost);
  return s;
}

Status IoEngine::WriteNow(WritableFile& f, std::string_view data) {
  const auto start = Clock::now();
  Status s = fs_->Append(f, data);
  if (s.ok()) {
    std::lock_guard l(mu_);
    stats_.bytes_written += data.size();
  }
  const auto cost = options_.latency.WriteCost(data.size());
  if (cost.count() > 0) std::this_thread::sleep_until(start + cost);
  return s;
}

}  // namespace alsm::io
