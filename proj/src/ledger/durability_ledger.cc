#include "ledger/durability_ledger.h"

#include <algorithm>

namespace alsm {

const char* LedgerStateName(LedgerState s) {
  switch (s) {
    case LedgerState::kPending:
      return "pending";
    case LedgerState::kDurable:
      return "durable";
    case LedgerState::kRetired:
      return "retired";
  }
  return "?";
}

DurabilityLedger::DurabilityLedger(LedgerHooks hooks, uint32_t fsync_retry_limit)
    : hooks_(std::move(hooks)), retry_limit_(fsync_retry_limit) {
  if (!hooks_.wait) {
    hooks_.wait = [this](io::ReqId) { cq_.WaitAny(std::chrono::milliseconds(2)); };
  }
}

void DurabilityLedger::Emit(LedgerEventKind kind, EpochId epoch, io::Clock::time_point at) const {
  if (hooks_.on_event) hooks_.on_event(LedgerEvent{kind, epoch, at});
}

void DurabilityLedger::Crash(const char* point) const {
  if (hooks_.crash_point) hooks_.crash_point(point);
}

void DurabilityLedger::Register(LedgerEntry entry) {
  const auto now = io::Clock::now();
  std::lock_guard l(mu_);
  for (const auto& p : entry.parents) {
    if (auto it = offspring_epoch_.find(p.file_id.value); it != offspring_epoch_.end()) {
      entry.depends_on.insert(it->second);
    }
  }
  for (const auto& o : entry.offspring) offspring_epoch_[o.file_id.value] = entry.epoch.value;
  if (entry.opened_at == io::Clock::time_point{}) entry.opened_at = now;
  entry.state = LedgerState::kPending;
  ++stats_.opened;
  const EpochId epoch = entry.epoch;
  entries_.emplace(epoch.value, std::move(entry));
  Emit(LedgerEventKind::kOpened, epoch, now);
}

void DurabilityLedger::OnBatchComplete(io::ReqId id, Status status,
                                       std::vector<std::string> failed_paths,
                                       io::Clock::time_point at) {
  std::lock_guard l(mu_);
  completed_[id] = Completion{std::move(status), std::move(failed_paths), at};
}

void DurabilityLedger::HarvestLocked() {
  for (auto& ev : cq_.Poll()) {
    completed_[ev.id] = Completion{std::move(ev.status), std::move(ev.failed_paths),
                                   ev.complete_time};
  }
}

Status DurabilityLedger::ApplyCompletionLocked(LedgerEntry& e, Completion c) {
  if (c.status.ok()) {
    e.state = LedgerState::kDurable;
    Emit(LedgerEventKind::kBatchComplete, e.epoch, c.at);
    return Status::OK();
  }
  if (e.fsync_attempts <= retry_limit_ && hooks_.resubmit) {
    io::ReqId id = 0;
    Status s = hooks_.resubmit(e, c.failed_paths, &id);
    if (s.ok()) {
      ++e.fsync_attempts;
      ++stats_.fsync_retries;
      e.batch_id = id;
      Emit(LedgerEventKind::kRetry, e.epoch, io::Clock::now());
      return Status::OK();
    }
  }
  // Retries exhausted: rebuild each failed offspring from the retained parents.
  if (!hooks_.rebuild) return c.status;
  if (c.failed_paths.empty()) c.failed_paths = e.offspring_paths;
  for (const auto& path : c.failed_paths) {
    Status s = hooks_.rebuild(e, path);
    if (!s.ok()) {
      // Keep the failure visible to the next checkup.
      completed_[e.batch_id] = c;
      return s;
    }
    ++stats_.rebuilt_files;
    Emit(LedgerEventKind::kRebuilt, e.epoch, io::Clock::now());
  }
  e.state = LedgerState::kDurable;
  Emit(LedgerEventKind::kBatchComplete, e.epoch, io::Clock::now());
  return Status::OK();
}

Status DurabilityLedger::RetireDurableLocked(LedgerEntry& e) {
  VersionEdit mark;
  for (const auto& o : e.offspring) mark.marked_durable.push_back(o.file_id);
  Status s = hooks_.log_edit ? hooks_.log_edit(&mark) : Status::OK();
  if (!s.ok()) return s;
  Crash("ledger.after_mark_durable");
  s = hooks_.delete_files ? hooks_.delete_files(e.parents) : Status::OK();
  if (!s.ok()) return s;
  Crash("ledger.after_parent_delete");
  VersionEdit close;
  close.ledger_closed.push_back(e.epoch);
  s = hooks_.log_edit ? hooks_.log_edit(&close) : Status::OK();
  if (!s.ok()) return s;
  Crash("ledger.after_close");
  e.state = LedgerState::kRetired;
  return Status::OK();
}

Status DurabilityLedger::RetireLocked(std::unique_lock<std::mutex>& lk, uint64_t epoch,
                                      bool blocking, CheckupResult* result) {
  bool counted_wait = false;
  while (true) {
    auto it = entries_.find(epoch);
    if (it == entries_.end()) return Status::OK();

    // An epoch's parents may be offspring of older epochs; those retire first
    // so a chain of volatile generations never loses its durable root.
    std::vector<uint64_t> deps(it->second.depends_on.begin(), it->second.depends_on.end());
    for (uint64_t dep : deps) {
      if (!entries_.count(dep)) continue;
      Status s = RetireLocked(lk, dep, blocking, result);
      if (!s.ok()) return s;
    }
    it = entries_.find(epoch);
    if (it == entries_.end()) return Status::OK();
    bool deps_open = false;
    for (uint64_t dep : it->second.depends_on) deps_open |= entries_.count(dep) > 0;
    if (deps_open) {
      if (!blocking) return Status::OK();
      continue;
    }

    LedgerEntry& e = it->second;
    HarvestLocked();
    if (e.state == LedgerState::kPending) {
      if (auto c = completed_.find(e.batch_id); c != completed_.end()) {
        Completion done = std::move(c->second);
        completed_.erase(c);
        Status s = ApplyCompletionLocked(e, std::move(done));
        if (!s.ok()) return s;
      }
    }
    if (e.state == LedgerState::kPending) {
      if (!blocking) return Status::OK();
      if (!counted_wait) {
        counted_wait = true;
        ++result->fallback_waits;
        ++stats_.fallback_waits;
        Emit(LedgerEventKind::kFallbackWait, e.epoch, io::Clock::now());
      }
      const io::ReqId batch = e.batch_id;
      lk.unlock();
      hooks_.wait(batch);
      lk.lock();
      continue;
    }

    Status s = RetireDurableLocked(e);
    if (!s.ok()) return s;
    for (const auto& o : e.offspring) offspring_epoch_.erase(o.file_id.value);
    result->retired.push_back(e.epoch);
    ++stats_.retired;
    Emit(LedgerEventKind::kRetired, e.epoch, io::Clock::now());
    entries_.erase(it);
    return Status::OK();
  }
}

CheckupResult DurabilityLedger::RetireEpochs(const std::vector<uint64_t>& epochs, bool blocking) {
  CheckupResult result;
  std::unique_lock lk(mu_);
  for (uint64_t epoch : epochs) {
    Status s = RetireLocked(lk, epoch, blocking, &result);
    if (!s.ok() && result.status.ok()) result.status = s;
  }
  return result;
}

CheckupResult DurabilityLedger::Checkup(const std::vector<FileId>& inputs, bool blocking) {
  std::vector<uint64_t> epochs;
  {
    std::lock_guard l(mu_);
    for (const auto& id : inputs) {
      if (auto it = offspring_epoch_.find(id.value); it != offspring_epoch_.end()) {
        epochs.push_back(it->second);
      }
    }
  }
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
  return RetireEpochs(epochs, blocking);
}

CheckupResult DurabilityLedger::Sweep(std::chrono::milliseconds max_age,
                                      io::Clock::time_point now) {
  std::vector<uint64_t> epochs;
  {
    std::lock_guard l(mu_);
    for (const auto& [epoch, e] : entries_) {
      if (e.opened_at + max_age <= now) epochs.push_back(epoch);
    }
  }
  CheckupResult r = RetireEpochs(epochs, true);
  std::lock_guard l(mu_);
  stats_.swept += r.retired.size();
  return r;
}

CheckupResult DurabilityLedger::RetireAll() {
  std::vector<uint64_t> epochs;
  {
    std::lock_guard l(mu_);
    for (const auto& [epoch, e] : entries_) epochs.push_back(epoch);
  }
  return RetireEpochs(epochs, true);
}

bool DurabilityLedger::IsVolatile(FileId id) const {
  std::lock_guard l(mu_);
  return offspring_epoch_.count(id.value) > 0;
}

size_t DurabilityLedger::OpenCount() const {
  std::lock_guard l(mu_);
  return entries_.size();
}

std::vector<LedgerEntryInfo> DurabilityLedger::Dump() const {
  const auto now = io::Clock::now();
  std::lock_guard l(mu_);
  std::vector<LedgerEntryInfo> out;
  for (const auto& [epoch, e] : entries_) {
    LedgerEntryInfo info{e.epoch, e.state, e.output_level, {}, {},
                         std::chrono::duration<double>(now - e.opened_at).count()};
    if (info.state == LedgerState::kPending && completed_.count(e.batch_id) &&
        completed_.at(e.batch_id).status.ok()) {
      info.state = LedgerState::kDurable;
    }
    for (const auto& p : e.parents) info.parents.push_back(p.file_id);
    for (const auto& o : e.offspring) info.offspring.push_back(o.file_id);
    out.push_back(std::move(info));
  }
  return out;
}

LedgerStats DurabilityLedger::stats() const {
  std::lock_guard l(mu_);
  return stats_;
}

}  // namespace alsm
