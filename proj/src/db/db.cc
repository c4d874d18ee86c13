#include "db/db.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

#include <json.hpp>

#include "compaction/picker.h"
#include "compaction/rebuild.h"
#include "db/db_iter.h"
#include "table/merge_iterator.h"
#include "table/sst_format.h"
#include "util/crash_point.h"

namespace alsm {

namespace {

using Nanos = std::chrono::nanoseconds;

double Seconds(Nanos n) { return std::chrono::duration<double>(n).count(); }

bool ParseNumbered(std::string_view name, std::string_view prefix, std::string_view suffix,
                   uint64_t* id) {
  if (name.size() <= prefix.size() + suffix.size()) return false;
  if (name.substr(0, prefix.size()) != prefix) return false;
  if (name.substr(name.size() - suffix.size()) != suffix) return false;
  std::string_view digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) return false;
  *id = std::stoull(std::string(digits));
  return true;
}

nlohmann::json PhasesJson(const PhaseTimes& p) {
  const double total = Seconds(p.total());
  auto pct = [&](Nanos n) { return total > 0 ? 100.0 * Seconds(n) / total : 0.0; };
  return {{"compute_seconds", Seconds(p.compute)},
          {"write_seconds", Seconds(p.write)},
          {"fsync_seconds", Seconds(p.fsync)},
          {"compute_pct", pct(p.compute)},
          {"write_pct", pct(p.write)},
          {"fsync_pct", pct(p.fsync)}};
}

}  // namespace

const char* StallReasonName(StallReason r) {
  switch (r) {
    case StallReason::kNone:
      return "none";
    case StallReason::kTooManyImmutables:
      return "too_many_immutables";
    case StallReason::kTooManyL0:
      return "too_many_l0";
    case StallReason::kPendingCompactionBytes:
      return "pending_compaction_bytes";
  }
  return "?";
}

double EngineMetrics::WriteAmplification() const {
  if (user_bytes == 0) return 0;
  return static_cast<double>(flush_bytes + compaction_bytes_written) /
         static_cast<double>(user_bytes);
}

std::string EngineMetrics::ToJson() const {
  nlohmann::json j;
  j["puts"] = puts;
  j["deletes"] = deletes;
  j["gets"] = gets;
  j["user_bytes"] = user_bytes;
  j["wal_bytes"] = wal_bytes;
  j["stall_seconds"] = stall_seconds;
  j["stall_events"] = stall_events;
  for (int r = 1; r < 4; ++r) {
    j["stall_seconds_by_reason"][StallReasonName(static_cast<StallReason>(r))] =
        stall_seconds_by_reason[r];
  }
  j["flushes"] = flushes;
  j["flush_bytes"] = flush_bytes;
  j["flush_phases"] = PhasesJson(flush_phases);
  j["compactions_count"] = compactions;
  j["compaction_errors"] = compaction_errors;
  j["compaction_bytes_read"] = compaction_bytes_read;
  j["compaction_bytes_written"] = compaction_bytes_written;
  j["compaction_output_files"] = compaction_output_files;
  j["buffers_submitted"] = buffers_submitted;
  j["fallback_fsync_waits"] = fallback_fsync_waits;
  j["compactions_with_fallback"] = compactions_with_fallback;
  j["phase_breakdown"] = PhasesJson(compaction_phases);
  j["bytes_written"] = flush_bytes + compaction_bytes_written;
  j["write_amplification"] = WriteAmplification();
  j["pipelined_merges"] = pipelined_merges;
  j["ledger"] = {{"opened", ledger.opened},
                 {"retired", ledger.retired},
                 {"open", ledger_open},
                 {"fallback_waits", ledger.fallback_waits},
                 {"fsync_retries", ledger.fsync_retries},
                 {"rebuilt_files", ledger.rebuilt_files},
                 {"swept", ledger.swept}};
  j["recovery"] = {{"entries_resolved", recovery.entries_resolved},
                   {"offspring_verified", recovery.offspring_verified},
                   {"offspring_rebuilt", recovery.offspring_rebuilt}};
  return j.dump();
}

DB::DB(const EngineConfig& config, std::string dir)
    : config_(config), dir_(std::move(dir)), pool_(config.merge_buffer_size) {}

Status DB::Open(const EngineConfig& config, const std::string& dir, std::unique_ptr<DB>* out) {
  Status s = config.Validate();
  if (!s.ok()) return s;
  std::unique_ptr<DB> db(new DB(config, dir));
  s = db->fs_.CreateDir(dir);
  if (!s.ok()) return s;
  db->io_ = std::make_unique<io::IoEngine>(&db->fs_, io::IoEngineOptions::FromConfig(config));
  db->versions_ = std::make_unique<VersionSet>(dir, config, db->io_.get());
  db->ledger_ = std::make_unique<DurabilityLedger>(db->MakeLedgerHooks(), config.fsync_retry_limit);

  crash::ConfigureFromEnv();
  crash::SetFileSystem(&db->fs_);
  DB* raw = db.get();
  crash::SetReporter([raw] {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "last_seqno=%" PRIu64 "\nflushed_seqno=%" PRIu64 "\n",
                  raw->last_seq_.load(), raw->versions_->last_seqno());
    return std::string(buf);
  });

  s = db->Recover();
  if (!s.ok()) {
    crash::SetReporter(nullptr);
    crash::SetFileSystem(nullptr);
    return s;
  }
  db->flush_thread_ = std::thread([raw] { raw->FlushWorker(); });
  for (uint32_t i = 0; i < config.compaction_threads; ++i) {
    db->compaction_threads_.emplace_back([raw] { raw->CompactionWorker(); });
  }
  db->sweep_thread_ = std::thread([raw] { raw->SweepWorker(); });
  *out = std::move(db);
  return Status::OK();
}

DB::~DB() {
  Close();
  // In-flight requests complete into queues owned by the ledger and jobs, so
  // the engine drains before anything else goes away.
  io_.reset();
  crash::SetReporter(nullptr);
  crash::SetFileSystem(nullptr);
}

LedgerHooks DB::MakeLedgerHooks() {
  LedgerHooks h;
  h.log_edit = [this](VersionEdit* e) { return versions_->LogAndApply(e, false); };
  h.delete_files = [this](const std::vector<SstMeta>& files) {
    for (const auto& m : files) {
      Status s = fs_.RemoveFile(SstFileName(dir_, m.file_id));
      if (!s.ok() && !s.IsNotFound()) return s;
    }
    return Status::OK();
  };
  h.resubmit = [this](const LedgerEntry& e, const std::vector<std::string>& paths,
                      io::ReqId* id) {
    auto manifest = versions_->manifest_file();
    std::vector<std::shared_ptr<io::WritableFile>> files;
    for (const auto& f : e.handles) {
      if (std::find(paths.begin(), paths.end(), f->path()) != paths.end()) files.push_back(f);
    }
    if (manifest &&
        std::find(paths.begin(), paths.end(), manifest->path()) != paths.end()) {
      files.push_back(manifest);
    }
    if (files.empty()) {
      files = e.handles;
      if (manifest) files.push_back(manifest);
    }
    io::IoRequest req = io::IoRequest::FsyncBatch(std::move(files));
    Status s;
    while ((s = io_->Submit(std::move(req), ledger_->completion_queue(), id)).IsBusy()) {
      std::this_thread::sleep_for(std::chrono::microseconds(100));
    }
    return s;
  };
  h.rebuild = [this](const LedgerEntry& e, const std::string& path) {
    for (size_t i = 0; i < e.offspring_paths.size(); ++i) {
      if (e.offspring_paths[i] == path) {
        return RebuildFromParents(dir_, io_.get(), e.parents, e.offspring[i], e.drop_tombstones,
                                  config_.merge_buffer_size);
      }
    }
    auto manifest = versions_->manifest_file();
    if (manifest && manifest->path() == path) return io_->SyncNow(*manifest);
    return Status::InvalidArgument("not a member of the batch: " + path);
  };
  h.crash_point = [](const char* name) { crash::Hit(name); };
  h.on_event = [this](const LedgerEvent& ev) {
    switch (ev.kind) {
      case LedgerEventKind::kBatchComplete:
        schedule_.Record(ScheduleEventKind::kBatchComplete, ev.epoch.value, ev.at);
        break;
      case LedgerEventKind::kFallbackWait:
        schedule_.Record(ScheduleEventKind::kFallbackWait, ev.epoch.value, ev.at);
        break;
      case LedgerEventKind::kRetired:
        schedule_.Record(ScheduleEventKind::kRetired, ev.epoch.value, ev.at);
        break;
      default:
        break;
    }
  };
  return h;
}

// ---------------------------------------------------------------------------
// Recovery

Status DB::Recover() {
  ReplayedState state;
  Status s = versions_->Recover(&state);
  if (!s.ok()) return s;

  std::vector<std::string> names;
  s = fs_.ListDir(dir_, &names);
  if (!s.ok()) return s;
  std::vector<std::pair<uint64_t, std::string>> wals;
  for (const auto& name : names) {
    uint64_t id;
    if (ParseNumbered(name, "wal-", ".log", &id)) {
      wals.emplace_back(id, dir_ + "/" + name);
      state.next_file_id = std::max(state.next_file_id, id + 1);
    } else if (ParseNumbered(name, "sst-", ".sst", &id)) {
      state.next_file_id = std::max(state.next_file_id, id + 1);
    }
  }
  std::sort(wals.begin(), wals.end());

  RecoveryReport report;
  s = ResolveOpenLedgerEntries(dir_, io_.get(), config_.merge_buffer_size, &state, &report);
  if (!s.ok()) return s;
  {
    std::lock_guard l(metrics_mu_);
    metrics_.recovery = report;
  }
  s = versions_->Install(state);
  if (!s.ok()) return s;
  next_epoch_.store(state.max_epoch + 1);
  s = RemoveOrphans();
  if (!s.ok()) return s;

  s = ReplayWals(wals);
  if (!s.ok()) return s;
  mem_ = std::make_shared<MemTable>();
  return NewWal();
}

Status DB::RemoveOrphans() {
  std::vector<std::string> names;
  Status s = fs_.ListDir(dir_, &names);
  if (!s.ok()) return s;
  VersionRef v = versions_->current();
  for (const auto& name : names) {
    uint64_t id;
    bool orphan = false;
    if (ParseNumbered(name, "sst-", ".sst", &id)) {
      orphan = v->Find(FileId{id}) == nullptr;
    } else if (name == "MANIFEST.tmp" ||
               (name.size() > 8 && name.substr(name.size() - 8) == ".rebuild")) {
      orphan = true;
    }
    if (orphan) fs_.RemoveFile(dir_ + "/" + name);
  }
  return fs_.SyncDir(dir_);
}

Status DB::ReplayWals(const std::vector<std::pair<uint64_t, std::string>>& wals) {
  SequenceNumber expected = versions_->last_seqno() + 1;
  auto mem = std::make_shared<MemTable>();
  bool gap = false;
  Status s;
  for (const auto& [segment, path] : wals) {
    if (gap || !s.ok()) break;
    std::string data;
    s = fs_.ReadFile(path, &data);
    if (!s.ok()) return s;
    WalReplayStats stats;
    Status rs = ReplayWal(
        data,
        [&](const WalRecord& rec) {
          if (gap || !s.ok() || rec.seqno < expected) return;
          if (rec.seqno != expected) {
            // Records after a lost one cannot be applied without reordering history.
            gap = true;
            return;
          }
          mem->Add(rec.seqno, rec.kind, rec.user_key, rec.value);
          ++expected;
          if (mem->ApproximateBytes() >= config_.memtable_limit) {
            s = FlushMemTable(mem);
            mem = std::make_shared<MemTable>();
          }
        },
        &stats);
    if (!rs.ok()) return rs;
    if (stats.torn_tail) gap = true;
  }
  if (!s.ok()) return s;
  if (!mem->Empty()) {
    s = FlushMemTable(mem);
    if (!s.ok()) return s;
  }
  last_seq_.store(std::max(expected - 1, versions_->last_seqno()));
  for (const auto& [segment, path] : wals) fs_.RemoveFile(path);
  return fs_.SyncDir(dir_);
}

Status DB::NewWal() {
  const FileId segment = versions_->NewFileId();
  std::unique_ptr<WalWriter> w;
  Status s = WalWriter::Create(io_.get(), dir_, segment, &w);
  if (!s.ok()) return s;
  wal_ = std::move(w);
  mem_->wal_segments().push_back(segment);
  return Status::OK();
}

// ---------------------------------------------------------------------------
// Foreground path

Status DB::Put(std::string_view key, std::string_view value, SequenceNumber* seq) {
  if (value.size() > config_.max_value_size) return Status::InvalidArgument("value too large");
  return Write(ValueKind::kPut, key, value, seq);
}

Status DB::Delete(std::string_view key, SequenceNumber* seq) {
  return Write(ValueKind::kDelete, key, {}, seq);
}

Status DB::Write(ValueKind kind, std::string_view key, std::string_view value,
                 SequenceNumber* seq) {
  std::unique_lock wl(write_mu_);
  Status s = MakeRoomForWrite(wl, MemTable::Charge(key, value));
  if (!s.ok()) return s;
  const SequenceNumber n = last_seq_.load() + 1;
  const uint64_t before = wal_->size();
  s = wal_->Append(WalRecord{n, kind, key, value}, config_.wal_fsync_each_write);
  if (!s.ok()) {
    SetBackgroundError(s);
    return s;
  }
  crash::Hit("wal.after_append");
  if (config_.wal_fsync_each_write) crash::Hit("wal.after_sync");
  mem_->Add(n, kind, key, value);
  last_seq_.store(n);
  {
    std::lock_guard l(metrics_mu_);
    if (kind == ValueKind::kPut) {
      ++metrics_.puts;
    } else {
      ++metrics_.deletes;
    }
    metrics_.user_bytes += key.size() + value.size();
    metrics_.wal_bytes += wal_->size() - before;
  }
  if (seq) *seq = n;
  return Status::OK();
}

StallReason DB::CurrentStall() const {
  VersionRef v = versions_->current();
  if (static_cast<uint32_t>(v->NumFiles(0)) > config_.EffectiveL0StallFiles()) {
    return StallReason::kTooManyL0;
  }
  if (config_.pending_compaction_bytes_stall > 0) {
    uint64_t pending = 0;
    for (int level = 1; level < kNumLevels; ++level) {
      const uint64_t bytes = v->LevelBytes(level);
      const uint64_t cap = *LevelCapacity(config_, level);
      if (bytes > cap) pending += bytes - cap;
    }
    if (pending > config_.pending_compaction_bytes_stall) {
      return StallReason::kPendingCompactionBytes;
    }
  }
  return StallReason::kNone;
}

Status DB::MakeRoomForWrite(std::unique_lock<std::mutex>& wl, uint64_t charge) {
  bool stalled = false;
  Status result;
  while (true) {
    {
      std::lock_guard l(bg_mu_);
      if (!bg_error_.ok()) {
        result = bg_error_;
        break;
      }
      if (closed_) {
        result = Status::Closed("engine closed");
        break;
      }
    }
    StallReason reason = StallReason::kNone;
    if (mem_->ApproximateBytes() + charge > config_.memtable_limit && !mem_->Empty()) {
      size_t imms;
      {
        std::lock_guard l(mem_mu_);
        imms = imms_.size();
      }
      if (imms >= config_.max_immutables) {
        reason = StallReason::kTooManyImmutables;
      } else {
        RotateLocked();
        continue;
      }
    } else {
      reason = CurrentStall();
    }
    if (reason == StallReason::kNone) break;
    if (!stalled) {
      stalled = true;
      if (stalled_writers_++ == 0) {
        stall_start_ = io::Clock::now();
        stall_reason_ = reason;
        std::lock_guard l(metrics_mu_);
        ++metrics_.stall_events;
      }
    }
    stall_cv_.wait_for(wl, std::chrono::milliseconds(5));
  }
  if (stalled && --stalled_writers_ == 0) {
    const double secs = Seconds(io::Clock::now() - stall_start_);
    std::lock_guard l(metrics_mu_);
    metrics_.stall_seconds += secs;
    metrics_.stall_seconds_by_reason[static_cast<int>(stall_reason_)] += secs;
  }
  return result;
}

void DB::RotateLocked() {
  {
    std::lock_guard l(mem_mu_);
    mem_->Freeze();
    imms_.push_back(mem_);
    mem_ = std::make_shared<MemTable>();
  }
  Status s = wal_->Close();
  if (s.ok()) s = NewWal();
  if (!s.ok()) SetBackgroundError(s);
  crash::Hit("memtable.after_rotate");
  {
    std::lock_guard l(bg_mu_);
  }
  bg_cv_.notify_all();
}

Status DB::Get(std::string_view key, std::string* value) {
  const SequenceNumber snapshot = last_seq_.load();
  std::shared_ptr<MemTable> mem;
  std::vector<std::shared_ptr<MemTable>> imms;
  {
    std::lock_guard l(mem_mu_);
    mem = mem_;
    imms.assign(imms_.rbegin(), imms_.rend());
  }
  VersionRef v = versions_->current();
  {
    std::lock_guard l(metrics_mu_);
    ++metrics_.gets;
  }
  bool deleted = false;
  if (mem->Get(key, snapshot, value, &deleted)) {
    return deleted ? Status::NotFound() : Status::OK();
  }
  for (const auto& imm : imms) {
    if (imm->Get(key, snapshot, value, &deleted)) {
      return deleted ? Status::NotFound() : Status::OK();
    }
  }
  Status s = v->Get(key, snapshot, value, &deleted);
  if (s.ok() && deleted) return Status::NotFound();
  return s;
}

std::unique_ptr<Iterator> DB::NewIterator() {
  const SequenceNumber snapshot = last_seq_.load();
  std::vector<std::shared_ptr<MemTable>> mems;
  {
    std::lock_guard l(mem_mu_);
    mems.push_back(mem_);
    mems.insert(mems.end(), imms_.begin(), imms_.end());
  }
  // Scans touch every file at once, so each gets a small read window.
  constexpr size_t kScanReadahead = 64 << 10;
  return NewUserIterator(std::move(mems), versions_->current(), snapshot, kScanReadahead);
}

// ---------------------------------------------------------------------------
// Background work

void DB::SetBackgroundError(const Status& s) {
  {
    std::lock_guard l(bg_mu_);
    if (bg_error_.ok()) bg_error_ = s;
  }
  bg_cv_.notify_all();
  stall_cv_.notify_all();
}

Status DB::FlushMemTable(const std::shared_ptr<MemTable>& mem) {
  if (mem->Empty()) {
    for (const auto& seg : mem->wal_segments()) fs_.RemoveFile(WalFileName(dir_, seg));
    return Status::OK();
  }
  const auto start = io::Clock::now();
  PhaseTimes phases;
  const FileId id = versions_->NewFileId();
  std::shared_ptr<io::WritableFile> file;
  Status s = fs_.NewWritableFile(SstFileName(dir_, id), &file);
  if (!s.ok()) return s;

  io::CompletionQueue cq;
  SstBuilderOptions bo;
  bo.target_file_size = UINT64_MAX;
  SstBuilder builder(bo, io_.get(), &cq, &pool_, file, id);
  std::vector<std::unique_ptr<Iterator>> children;
  children.push_back(mem->NewIterator());
  auto it = NewMergeIterator(std::move(children), MergeOptions{});
  for (it->SeekToFirst(); it->Valid() && s.ok(); it->Next()) {
    s = builder.Add(it->key(), it->value());
  }
  if (s.ok()) s = it->status();
  SstMeta meta;
  if (s.ok()) s = builder.Finish(&meta);

  auto wait_start = io::Clock::now();
  auto r = io_->WaitAll(cq, builder.pending_writes());
  for (auto& ev : r.events) {
    if (!ev.status.ok() && s.ok()) s = ev.status;
    pool_.Put(std::move(ev.buffer));
  }
  phases.write = io::Clock::now() - wait_start;
  if (s.ok()) crash::Hit("flush.after_build");

  // Level-0 files are always made durable before they become visible.
  wait_start = io::Clock::now();
  if (s.ok()) {
    io::ReqId fid = 0;
    s = io_->Submit(io::IoRequest::Fsync(file), &cq, &fid);
    if (s.ok()) {
      const io::ReqId ids[] = {fid};
      for (auto& ev : io_->WaitAll(cq, ids).events) {
        if (!ev.status.ok()) s = ev.status;
      }
    }
  }
  phases.fsync = io::Clock::now() - wait_start;
  fs_.Close(*file);
  if (!s.ok()) {
    fs_.RemoveFile(file->path());
    return s;
  }
  crash::Hit("flush.after_fsync");

  meta.level = 0;
  meta.durability = Durability::kDurable;
  VersionEdit edit;
  edit.added.push_back(meta);
  edit.last_seqno = mem->MaxSeqno();
  wait_start = io::Clock::now();
  {
    std::lock_guard l(versions_->mutex());
    s = versions_->LogAndApply(&edit, true);
  }
  phases.fsync += io::Clock::now() - wait_start;
  if (!s.ok()) return s;
  crash::Hit("flush.after_manifest");
  for (const auto& seg : mem->wal_segments()) fs_.RemoveFile(WalFileName(dir_, seg));

  phases.compute = (io::Clock::now() - start) - phases.write - phases.fsync;
  std::lock_guard l(metrics_mu_);
  ++metrics_.flushes;
  metrics_.flush_bytes += meta.file_size;
  metrics_.flush_phases += phases;
  return Status::OK();
}

void DB::FlushWorker() {
  while (true) {
    std::shared_ptr<MemTable> imm;
    {
      std::unique_lock l(bg_mu_);
      bg_cv_.wait(l, [&] {
        std::lock_guard ml(mem_mu_);
        return !imms_.empty() || shutting_down_ || !bg_error_.ok();
      });
      if (!bg_error_.ok()) return;
      {
        std::lock_guard ml(mem_mu_);
        if (imms_.empty()) return;  // shutting down with nothing left
        imm = imms_.front();
      }
      flush_running_ = true;
    }
    Status s = FlushMemTable(imm);
    if (s.ok()) {
      std::lock_guard ml(mem_mu_);
      imms_.pop_front();
    }
    {
      std::lock_guard l(bg_mu_);
      flush_running_ = false;
    }
    if (!s.ok()) SetBackgroundError(s);
    bg_cv_.notify_all();
    {
      std::lock_guard wl(write_mu_);
    }
    stall_cv_.notify_all();
  }
}

bool DB::CompactionNeeded() const {
  std::lock_guard l(versions_->mutex());
  VersionRef v = versions_->current();
  const auto scores = CompactionScores(*v, config_, versions_->being_compacted());
  return std::any_of(scores.begin(), scores.end(), [](double s) { return s >= 1.0; });
}

void DB::CompactionWorker() {
  CompactionEnv env;
  env.dir = dir_;
  env.config = &config_;
  env.io = io_.get();
  env.versions = versions_.get();
  env.ledger = ledger_.get();
  env.pool = &pool_;
  env.schedule = &schedule_;

  while (true) {
    std::optional<CompactionInputs> picked;
    EpochId epoch;
    {
      std::unique_lock l(bg_mu_);
      while (true) {
        if (shutting_down_ || !bg_error_.ok()) return;
        {
          std::lock_guard vl(versions_->mutex());
          VersionRef v = versions_->current();
          picked = PickCompaction(*v, config_, &versions_->being_compacted(),
                                  &versions_->compact_pointer(), versions_->inflight());
          if (picked) {
            epoch = EpochId{next_epoch_.fetch_add(1)};
            versions_->inflight().push_back(
                KeyRange{epoch.value, picked->output_level, picked->lo, picked->hi});
          }
        }
        if (picked) break;
        bg_cv_.wait_for(l, std::chrono::milliseconds(100));
      }
      ++running_compactions_;
    }

    CompactionJob job(env, std::move(*picked), epoch);
    Status s = job.Run();
    const CompactionStats& st = job.stats();
    {
      std::lock_guard l(metrics_mu_);
      if (s.ok()) {
        ++metrics_.compactions;
        metrics_.compaction_bytes_read += st.bytes_read;
        metrics_.compaction_bytes_written += st.bytes_written;
        metrics_.compaction_output_files += st.output_files;
        metrics_.buffers_submitted += st.buffers_submitted;
        metrics_.fallback_fsync_waits += st.fallback_waits;
        if (st.fallback_waits > 0) ++metrics_.compactions_with_fallback;
      } else {
        ++metrics_.compaction_errors;
      }
      metrics_.compaction_phases += st.phases;
    }
    {
      std::lock_guard l(bg_mu_);
      --running_compactions_;
    }
    if (!s.ok() && !s.IsIOError()) SetBackgroundError(s);
    bg_cv_.notify_all();
    {
      std::lock_guard wl(write_mu_);
    }
    stall_cv_.notify_all();
  }
}

void DB::SweepWorker() {
  std::unique_lock l(bg_mu_);
  auto next = io::Clock::now() + config_.ledger_sweep_interval;
  while (!shutting_down_) {
    if (bg_cv_.wait_until(l, next) == std::cv_status::timeout || io::Clock::now() >= next) {
      l.unlock();
      ledger_->Sweep(config_.ledger_sweep_max_age);
      l.lock();
      next = io::Clock::now() + config_.ledger_sweep_interval;
    }
  }
}

Status DB::Flush() {
  {
    std::unique_lock wl(write_mu_);
    {
      std::lock_guard l(bg_mu_);
      if (closed_) return Status::Closed("engine closed");
    }
    if (!mem_->Empty()) RotateLocked();
  }
  std::unique_lock l(bg_mu_);
  while (true) {
    if (!bg_error_.ok()) return bg_error_;
    bool empty;
    {
      std::lock_guard ml(mem_mu_);
      empty = imms_.empty();
    }
    if (empty && !flush_running_) return Status::OK();
    bg_cv_.wait_for(l, std::chrono::milliseconds(10));
  }
}

Status DB::WaitForIdle() {
  while (true) {
    {
      std::unique_lock l(bg_mu_);
      if (!bg_error_.ok()) return bg_error_;
      if (closed_) return Status::OK();
      bool imm_empty;
      {
        std::lock_guard ml(mem_mu_);
        imm_empty = imms_.empty();
      }
      if (imm_empty && !flush_running_ && running_compactions_ == 0 && !CompactionNeeded()) {
        return Status::OK();
      }
      bg_cv_.notify_all();
      bg_cv_.wait_for(l, std::chrono::milliseconds(10));
    }
  }
}

Status DB::Close() {
  {
    std::lock_guard l(bg_mu_);
    if (closed_) return Status::OK();
  }
  Status flush_status;
  {
    std::lock_guard l(bg_mu_);
    flush_status = bg_error_;
  }
  if (flush_status.ok()) flush_status = Flush();
  {
    std::lock_guard wl(write_mu_);
    std::lock_guard l(bg_mu_);
    shutting_down_ = true;
    closed_ = true;
  }
  bg_cv_.notify_all();
  stall_cv_.notify_all();
  if (flush_thread_.joinable()) flush_thread_.join();
  for (auto& t : compaction_threads_) {
    if (t.joinable()) t.join();
  }
  if (sweep_thread_.joinable()) sweep_thread_.join();

  CheckupResult r = ledger_->RetireAll();
  if (wal_) {
    wal_->Close();
    if (mem_ && mem_->Empty()) {
      for (const auto& seg : mem_->wal_segments()) fs_.RemoveFile(WalFileName(dir_, seg));
    }
  }
  if (!flush_status.ok()) return flush_status;
  return r.status;
}

// ---------------------------------------------------------------------------
// Introspection

CheckupResult DB::LedgerSweep(std::chrono::milliseconds max_age) {
  return ledger_->Sweep(max_age);
}

std::vector<LedgerEntryInfo> DB::LedgerDump() const { return ledger_->Dump(); }

EngineMetrics DB::Metrics() const {
  EngineMetrics m;
  {
    std::lock_guard l(metrics_mu_);
    m = metrics_;
  }
  m.ledger = ledger_->stats();
  m.ledger_open = ledger_->OpenCount();
  m.pipelined_merges = ScheduleLog::CountPipelinedMerges(schedule_.Events());
  return m;
}

std::optional<std::string> DB::GetProperty(std::string_view name) const {
  VersionRef v = versions_->current();
  auto level_arg = [&](std::string_view prefix) -> int {
    if (name.substr(0, prefix.size()) != prefix) return -1;
    std::string rest(name.substr(prefix.size()));
    if (rest.empty() || !std::all_of(rest.begin(), rest.end(), ::isdigit)) return -1;
    int level = std::stoi(rest);
    return level < kNumLevels ? level : -1;
  };
  if (int level = level_arg("alsm.num-files-at-level"); level >= 0) {
    return std::to_string(v->NumFiles(level));
  }
  if (int level = level_arg("alsm.level-bytes"); level >= 0) {
    return std::to_string(v->LevelBytes(level));
  }
  if (name == "alsm.last-seqno") return std::to_string(last_seq_.load());
  if (name == "alsm.flushed-seqno") return std::to_string(versions_->last_seqno());
  if (name == "alsm.total-files") return std::to_string(v->TotalFiles());
  if (name == "alsm.ledger-open") return std::to_string(ledger_->OpenCount());
  if (name == "alsm.volatile-files") {
    uint64_t n = 0;
    for (const auto& m : v->AllMetas()) n += m.durability == Durability::kVolatile;
    return std::to_string(n);
  }
  if (name == "alsm.levels") {
    std::string out;
    for (int level = 0; level < kNumLevels; ++level) {
      out += "L" + std::to_string(level) + " files=" + std::to_string(v->NumFiles(level)) +
             " bytes=" + std::to_string(v->LevelBytes(level)) + "\n";
    }
    return out;
  }
  if (name == "alsm.stats") return Metrics().ToJson();
  if (name == "alsm.schedule") return schedule_.ToJson();
  if (name == "alsm.invariants") {
    Status s = v->CheckInvariants();
    return s.ok() ? std::string("ok") : s.ToString();
  }
  return std::nullopt;
}

}  // namespace alsm
