#include "compaction/compaction_job.h"

#include <algorithm>

#include "table/merge_iterator.h"
#include "table/sst_format.h"
#include "table/sst_reader.h"
#include "util/crash_point.h"

namespace alsm {

namespace {

using Nanos = std::chrono::nanoseconds;

Nanos Since(io::Clock::time_point start) { return io::Clock::now() - start; }

}  // namespace

CompactionJob::CompactionJob(const CompactionEnv& env, CompactionInputs inputs, EpochId epoch)
    : env_(env),
      inputs_(std::move(inputs)),
      epoch_(epoch),
      async_(env.io->backend() != IoBackend::kSync) {
  stats_.epoch = epoch_;
  stats_.level = inputs_.level;
  stats_.async = async_;
  stats_.input_files = inputs_.inputs_n.size() + inputs_.inputs_n1.size();
  stats_.bytes_read = inputs_.InputBytes();
}

CompactionJob::~CompactionJob() {
  if (!released_) {
    std::lock_guard l(env_.versions->mutex());
    ReleaseLocked();
  }
}

void CompactionJob::ReleaseLocked() {
  if (released_) return;
  released_ = true;
  auto& busy = env_.versions->being_compacted();
  for (const auto& f : inputs_.AllInputs()) busy.erase(f->meta.file_id.value);
  auto& ranges = env_.versions->inflight();
  ranges.erase(std::remove_if(ranges.begin(), ranges.end(),
                              [&](const KeyRange& r) { return r.epoch == epoch_.value; }),
               ranges.end());
}

Status CompactionJob::OpenOutput() {
  const FileId id = env_.versions->NewFileId();
  std::shared_ptr<io::WritableFile> file;
  Status s = env_.io->fs()->NewWritableFile(SstFileName(env_.dir, id), &file);
  if (!s.ok()) return s;
  SstBuilderOptions bo;
  bo.target_file_size = env_.config->sst_target_size;
  bo.wait_each_buffer = !async();
  builder_ = std::make_unique<SstBuilder>(bo, env_.io, &cq_, env_.pool, file, id);
  outputs_.push_back(Output{SstMeta{}, std::move(file)});
  outputs_.back().meta.file_id = id;
  return Status::OK();
}

Status CompactionJob::FinishOutput() {
  Output& out = outputs_.back();
  Status s = builder_->Finish(&out.meta);
  stats_.phases.write += builder_->io_wait_time();
  stats_.buffers_submitted += builder_->buffers_submitted();
  for (io::ReqId id : builder_->pending_writes()) {
    if (reaped_early_.erase(id) == 0) inflight_writes_.push_back(id);
  }
  builder_.reset();
  if (!s.ok()) return s;
  out.meta.level = inputs_.output_level;
  out.meta.birth_epoch = epoch_;
  out.meta.durability = async() ? Durability::kVolatile : Durability::kDurable;
  stats_.records_out += out.meta.record_count;
  ++stats_.output_files;
  stats_.bytes_written += out.meta.file_size;
  if (async()) return Status::OK();

  // Conventional path: each finished file is fsynced before moving on.
  const auto start = io::Clock::now();
  io::ReqId id = 0;
  s = env_.io->Submit(io::IoRequest::Fsync(out.file), &cq_, &id);
  if (s.ok()) {
    const io::ReqId ids[] = {id};
    auto r = env_.io->WaitAll(cq_, ids);
    for (auto& ev : r.events) {
      if (!ev.status.ok()) s = ev.status;
    }
  }
  stats_.phases.fsync += Since(start);
  if (s.ok()) s = env_.io->fs()->Close(*out.file);
  return s;
}

Status CompactionJob::HarvestWrites(bool wait_all) {
  Status result;
  std::vector<io::CompletionEvent> events;
  if (wait_all) {
    events = env_.io->WaitAll(cq_, inflight_writes_).events;
  } else {
    events = cq_.Poll();
  }
  for (auto& ev : events) {
    if (!ev.status.ok() && result.ok()) result = ev.status;
    env_.pool->Put(std::move(ev.buffer));
    auto pos = std::find(inflight_writes_.begin(), inflight_writes_.end(), ev.id);
    if (pos != inflight_writes_.end()) {
      inflight_writes_.erase(pos);
    } else {
      reaped_early_.insert(ev.id);
    }
  }
  return result;
}

void CompactionJob::Abort() {
  if (builder_) {
    for (io::ReqId id : builder_->pending_writes()) {
      if (reaped_early_.erase(id) == 0) inflight_writes_.push_back(id);
    }
    builder_.reset();
  }
  if (!inflight_writes_.empty()) HarvestWrites(true);
  for (auto& out : outputs_) {
    env_.io->fs()->Close(*out.file);
    env_.io->fs()->RemoveFile(out.file->path());
  }
  outputs_.clear();
  if (env_.schedule) env_.schedule->Record(ScheduleEventKind::kAborted, epoch_.value);
}

Status CompactionJob::Run() {
  const auto job_start = io::Clock::now();
  std::vector<FileId> input_ids;
  for (const auto& f : inputs_.AllInputs()) input_ids.push_back(f->meta.file_id);

  if (async()) {
    // Retire whatever earlier epochs already finished; never waits here.
    env_.ledger->Checkup(input_ids, false);
    crash::Hit("compaction.after_checkup");
  }
  if (env_.schedule) env_.schedule->Record(ScheduleEventKind::kMergeStart, epoch_.value);

  std::vector<std::unique_ptr<Iterator>> children;
  for (const auto& f : inputs_.AllInputs()) {
    children.push_back(f->reader->NewIterator(env_.config->merge_buffer_size));
  }
  MergeOptions mo;
  mo.drop_tombstones = inputs_.is_bottom;
  auto it = NewMergeIterator(std::move(children), mo);

  Status s;
  uint64_t since_poll = 0;
  for (it->SeekToFirst(); it->Valid() && s.ok(); it->Next()) {
    if (!builder_) s = OpenOutput();
    if (s.ok()) s = builder_->Add(it->key(), it->value());
    if (s.ok() && builder_->Full()) s = FinishOutput();
    // Recycle buffers of writes that already landed.
    if (s.ok() && async() && ++since_poll >= 512) {
      since_poll = 0;
      s = HarvestWrites(false);
    }
  }
  if (s.ok()) s = it->status();
  if (s.ok() && builder_) s = FinishOutput();
  it.reset();
  crash::Hit("compaction.after_write_submit");

  if (s.ok() && async()) {
    // The only place the asynchronous path blocks on data I/O.
    const auto start = io::Clock::now();
    s = HarvestWrites(true);
    stats_.phases.write += Since(start);
  }
  if (!s.ok()) {
    Abort();
    stats_.phases.compute = Since(job_start) - stats_.phases.write - stats_.phases.fsync;
    return s;
  }
  if (env_.schedule) env_.schedule->Record(ScheduleEventKind::kWritesComplete, epoch_.value);
  crash::Hit("compaction.after_writes_complete");

  s = async() ? CommitAsync() : CommitSync();
  if (!s.ok()) Abort();
  stats_.phases.compute = Since(job_start) - stats_.phases.write - stats_.phases.fsync;
  return s;
}

Status CompactionJob::CommitSync() {
  VersionEdit edit;
  for (const auto& f : inputs_.AllInputs()) edit.deleted.push_back({f->meta.level, f->meta.file_id});
  for (const auto& out : outputs_) edit.added.push_back(out.meta);

  Status s;
  {
    std::lock_guard l(env_.versions->mutex());
    const auto start = io::Clock::now();
    s = env_.versions->LogAndApply(&edit, true);
    stats_.phases.fsync += Since(start);
    ReleaseLocked();
  }
  if (!s.ok()) return s;
  outputs_.clear();
  for (const auto& f : inputs_.AllInputs()) {
    env_.io->fs()->RemoveFile(SstFileName(env_.dir, f->meta.file_id));
  }
  return Status::OK();
}

Status CompactionJob::CommitAsync() {
  // Inputs produced by an epoch whose batch is still in flight: the one
  // remaining synchronous wait, counted as a fallback.
  {
    std::vector<FileId> ids;
    for (const auto& f : inputs_.AllInputs()) ids.push_back(f->meta.file_id);
    const auto start = io::Clock::now();
    CheckupResult r = env_.ledger->Checkup(ids, true);
    stats_.fallback_waits = r.fallback_waits;
    if (r.fallback_waits > 0) stats_.phases.fsync += Since(start);
    if (!r.status.ok()) return r.status;
  }

  const io::ReqId batch = env_.io->ReserveId();
  LedgerEntry entry;
  entry.epoch = epoch_;
  entry.output_level = inputs_.output_level;
  entry.drop_tombstones = inputs_.is_bottom;
  entry.batch_id = batch;

  VersionEdit edit;
  LedgerOpenRecord open;
  open.epoch = epoch_;
  open.fsync_batch_id = batch;
  open.output_level = inputs_.output_level;
  open.drop_tombstones = inputs_.is_bottom;
  for (const auto& f : inputs_.AllInputs()) {
    edit.deleted.push_back({f->meta.level, f->meta.file_id});
    open.parents.push_back(f->meta);
  }
  std::vector<std::shared_ptr<io::WritableFile>> batch_files;
  for (const auto& out : outputs_) {
    edit.added.push_back(out.meta);
    open.offspring.push_back(out.meta.file_id);
    entry.offspring.push_back(out.meta);
    entry.offspring_paths.push_back(out.file->path());
    entry.handles.push_back(out.file);
    batch_files.push_back(out.file);
  }
  entry.parents = open.parents;
  edit.ledger_opened.push_back(std::move(open));

  std::lock_guard l(env_.versions->mutex());
  // Unsynced: the compound fsync below also covers the MANIFEST, so this
  // record is durable no later than the outputs it describes.
  Status s = env_.versions->LogAndApply(&edit, false);
  if (!s.ok()) {
    ReleaseLocked();
    return s;
  }
  if (env_.schedule) env_.schedule->Record(ScheduleEventKind::kLedgerOpen, epoch_.value);
  crash::Hit("compaction.after_ledger_open");

  batch_files.push_back(env_.versions->manifest_file());
  io::IoRequest req = io::IoRequest::FsyncBatch(std::move(batch_files));
  req.reserved_id = batch;
  io::ReqId id = 0;
  while (true) {
    s = env_.io->Submit(std::move(req), env_.ledger->completion_queue(), &id);
    if (!s.IsBusy()) break;
    std::this_thread::sleep_for(std::chrono::microseconds(100));
  }
  if (env_.schedule) env_.schedule->Record(ScheduleEventKind::kFsyncSubmitted, epoch_.value);
  crash::Hit("compaction.after_fsync_submit");
  if (!s.ok()) {
    // The edit is applied; the ledger's retry path owns the batch from here.
    env_.ledger->OnBatchComplete(batch, s, entry.offspring_paths, io::Clock::now());
  }
  env_.ledger->Register(std::move(entry));
  ReleaseLocked();
  outputs_.clear();
  return Status::OK();
}

}  // namespace alsm
