#include "version/version_set.h"

#include <algorithm>

#include "table/sst_format.h"
#include "table/sst_reader.h"
#include "util/crash_point.h"

namespace alsm {

std::string ManifestFileName(const std::string& dir) { return dir + "/MANIFEST"; }

// ---------------------------------------------------------------------------
// Version

uint64_t Version::LevelBytes(int level) const {
  uint64_t total = 0;
  for (const auto& f : levels_[level]) total += f->meta.file_size;
  return total;
}

uint64_t Version::TotalFiles() const {
  uint64_t n = 0;
  for (const auto& l : levels_) n += l.size();
  return n;
}

FileRef Version::Find(FileId id) const {
  for (const auto& l : levels_) {
    for (const auto& f : l) {
      if (f->meta.file_id == id) return f;
    }
  }
  return nullptr;
}

Status Version::Get(std::string_view user_key, SequenceNumber snapshot, std::string* value,
                    bool* deleted) const {
  // Level 0 files overlap; newest first.
  for (const auto& f : levels_[0]) {
    if (user_key < f->meta.smallest_user_key() || user_key > f->meta.largest_user_key()) continue;
    Status s = f->reader->Get(user_key, snapshot, value, deleted);
    if (!s.IsNotFound()) return s;
  }
  for (int level = 1; level < kNumLevels; ++level) {
    const auto& files = levels_[level];
    auto it = std::lower_bound(files.begin(), files.end(), user_key,
                               [](const FileRef& f, std::string_view k) {
                                 return f->meta.largest_user_key() < k;
                               });
    if (it == files.end() || user_key < (*it)->meta.smallest_user_key()) continue;
    Status s = (*it)->reader->Get(user_key, snapshot, value, deleted);
    if (!s.IsNotFound()) return s;
  }
  return Status::NotFound();
}

std::vector<FileRef> Version::Overlapping(int level, std::string_view lo,
                                          std::string_view hi) const {
  std::vector<FileRef> out;
  for (const auto& f : levels_[level]) {
    if (f->meta.largest_user_key() < lo || f->meta.smallest_user_key() > hi) continue;
    out.push_back(f);
  }
  return out;
}

Status Version::CheckInvariants() const {
  for (int level = 0; level < kNumLevels; ++level) {
    const auto& files = levels_[level];
    for (size_t i = 0; i < files.size(); ++i) {
      const auto& m = files[i]->meta;
      if (m.level != level) return Status::Corruption("file level mismatch");
      if (CompareEncodedInternalKeys(m.smallest, m.largest) > 0) {
        return Status::Corruption("smallest > largest in file " + std::to_string(m.file_id.value));
      }
      if (level == 0 && m.durability != Durability::kDurable) {
        return Status::Corruption("volatile level-0 file");
      }
      if (level > 0 && i > 0 &&
          files[i - 1]->meta.largest_user_key() >= m.smallest_user_key()) {
        return Status::Corruption("overlapping files at level " + std::to_string(level));
      }
    }
  }
  return Status::OK();
}

std::vector<SstMeta> Version::AllMetas() const {
  std::vector<SstMeta> out;
  for (const auto& l : levels_) {
    for (const auto& f : l) out.push_back(f->meta);
  }
  std::sort(out.begin(), out.end(),
            [](const SstMeta& a, const SstMeta& b) { return a.file_id < b.file_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Replay

Status ReplayedState::Apply(const VersionEdit& edit) {
  if (edit.last_seqno) last_seqno = std::max(last_seqno, *edit.last_seqno);
  if (edit.next_file_id) next_file_id = std::max(next_file_id, *edit.next_file_id);
  for (const auto& d : edit.deleted) {
    if (d.level < 0 || d.level >= kNumLevels) return Status::Corruption("bad level in delete");
    levels[d.level].erase(d.file_id.value);
  }
  for (const auto& m : edit.added) {
    if (m.level < 0 || m.level >= kNumLevels) return Status::Corruption("bad level in add");
    levels[m.level][m.file_id.value] = m;
    next_file_id = std::max(next_file_id, m.file_id.value + 1);
    max_epoch = std::max(max_epoch, m.birth_epoch.value);
  }
  for (const auto& id : edit.marked_durable) {
    for (auto& l : levels) {
      if (auto it = l.find(id.value); it != l.end()) it->second.durability = Durability::kDurable;
    }
  }
  for (const auto& e : edit.ledger_opened) {
    open_entries[e.epoch.value] = e;
    max_epoch = std::max(max_epoch, e.epoch.value);
    for (const auto& p : e.parents) next_file_id = std::max(next_file_id, p.file_id.value + 1);
  }
  for (const auto& e : edit.ledger_closed) open_entries.erase(e.value);
  return Status::OK();
}

std::vector<SstMeta> ReplayedState::AllMetas() const {
  std::vector<SstMeta> out;
  for (const auto& l : levels) {
    for (const auto& [id, m] : l) out.push_back(m);
  }
  std::sort(out.begin(), out.end(),
            [](const SstMeta& a, const SstMeta& b) { return a.file_id < b.file_id; });
  return out;
}

Status ReplayManifest(std::string_view data, ReplayedState* out) {
  *out = ReplayedState();
  ManifestReadResult r = ReadManifestRecords(data);
  out->torn_tail = r.torn_tail;
  for (const auto& e : r.edits) {
    Status s = out->Apply(e);
    if (!s.ok()) return s;
    ++out->records;
  }
  return Status::OK();
}

// ---------------------------------------------------------------------------
// VersionSet

namespace {

void SortLevels(std::array<std::vector<FileRef>, kNumLevels>* levels) {
  auto& l0 = (*levels)[0];
  std::sort(l0.begin(), l0.end(), [](const FileRef& a, const FileRef& b) {
    if (a->meta.max_seqno != b->meta.max_seqno) return a->meta.max_seqno > b->meta.max_seqno;
    return a->meta.file_id > b->meta.file_id;
  });
  for (int level = 1; level < kNumLevels; ++level) {
    auto& l = (*levels)[level];
    std::sort(l.begin(), l.end(), [](const FileRef& a, const FileRef& b) {
      return CompareEncodedInternalKeys(a->meta.smallest, b->meta.smallest) < 0;
    });
  }
}

}  // namespace

VersionSet::VersionSet(std::string dir, const EngineConfig& config, io::IoEngine* io)
    : dir_(std::move(dir)), config_(config), io_(io), current_(std::make_shared<Version>()) {}

VersionRef VersionSet::current() const {
  std::lock_guard l(current_mu_);
  return current_;
}

std::shared_ptr<io::WritableFile> VersionSet::manifest_file() const {
  std::lock_guard l(manifest_mu_);
  return manifest_;
}

std::map<uint64_t, LedgerOpenRecord> VersionSet::OpenLedgerEntries() const {
  std::lock_guard l(manifest_mu_);
  return open_entries_;
}

Status VersionSet::Recover(ReplayedState* state) {
  const std::string path = ManifestFileName(dir_);
  *state = ReplayedState();
  if (!io_->fs()->FileExists(path)) return Status::OK();
  std::string data;
  Status s = io_->fs()->ReadFile(path, &data);
  if (!s.ok()) return s;
  return ReplayManifest(data, state);
}

Status VersionSet::Install(const ReplayedState& state) {
  auto v = std::make_shared<Version>();
  for (int level = 0; level < kNumLevels; ++level) {
    for (const auto& [id, meta] : state.levels[level]) {
      auto fs = std::make_shared<FileState>();
      fs->meta = meta;
      Status s = SstReader::Open(SstFileName(dir_, meta.file_id), &fs->reader);
      if (!s.ok()) return s;
      v->levels_[level].push_back(std::move(fs));
    }
  }
  SortLevels(&v->levels_);
  next_file_id_.store(std::max(next_file_id_.load(), state.next_file_id));
  last_seqno_.store(std::max(last_seqno_.load(), state.last_seqno));

  // Snapshot record: the whole live set plus any still-open ledger entries.
  VersionEdit snap;
  for (const auto& l : v->levels_) {
    for (const auto& f : l) snap.added.push_back(f->meta);
  }
  for (const auto& [epoch, e] : state.open_entries) snap.ledger_opened.push_back(e);
  snap.last_seqno = last_seqno_.load();
  snap.next_file_id = next_file_id_.load();
  std::string payload, record;
  snap.EncodeTo(&payload);
  AppendManifestRecord(payload, &record);

  const std::string tmp = dir_ + "/MANIFEST.tmp";
  std::shared_ptr<io::WritableFile> f;
  Status s = io_->fs()->NewWritableFile(tmp, &f);
  if (s.ok()) s = io_->fs()->Append(*f, record);
  if (s.ok()) s = io_->SyncNow(*f);
  if (s.ok()) s = io_->fs()->Close(*f);
  if (s.ok()) s = io_->fs()->RenameFile(tmp, ManifestFileName(dir_));
  if (s.ok()) s = io_->fs()->SyncDir(dir_);
  if (!s.ok()) return s;

  std::lock_guard ml(manifest_mu_);
  open_entries_ = state.open_entries;
  manifest_records_ = 1;
  {
    std::lock_guard cl(current_mu_);
    current_ = std::move(v);
  }
  return OpenManifestForAppend();
}

Status VersionSet::OpenManifestForAppend() {
  // The snapshot is small; reopen by rewriting it into a fresh handle so
  // appends are tracked for power-loss emulation.
  std::string data;
  Status s = io_->fs()->ReadFile(ManifestFileName(dir_), &data);
  if (!s.ok()) return s;
  const std::string tmp = dir_ + "/MANIFEST.tmp";
  std::shared_ptr<io::WritableFile> f;
  s = io_->fs()->NewWritableFile(tmp, &f);
  if (s.ok()) s = io_->fs()->Append(*f, data);
  if (s.ok()) s = io_->SyncNow(*f);
  if (s.ok()) s = io_->fs()->RenameFile(tmp, ManifestFileName(dir_));
  if (!s.ok()) return s;
  manifest_ = std::move(f);
  manifest_size_ = data.size();
  return Status::OK();
}

Status VersionSet::LogAndApply(VersionEdit* edit, bool sync) {
  std::map<uint64_t, std::shared_ptr<SstReader>> readers;
  for (const auto& m : edit->added) {
    std::shared_ptr<SstReader> r;
    Status s = SstReader::Open(SstFileName(dir_, m.file_id), &r);
    if (!s.ok()) return s;
    readers[m.file_id.value] = std::move(r);
  }

  std::lock_guard ml(manifest_mu_);
  if (!manifest_) return Status::Closed("version set not installed");
  edit->next_file_id = next_file_id_.load();
  if (!edit->last_seqno) edit->last_seqno = 0;
  std::string payload, record;
  edit->EncodeTo(&payload);
  AppendManifestRecord(payload, &record);
  if (crash::Armed("manifest.torn_record")) {
    // Leave half a record durably on disk, as a power cut mid-append would.
    io_->fs()->Write(*manifest_, manifest_size_, std::string_view(record).substr(0, record.size() / 2));
    io_->SyncNow(*manifest_);
    crash::Crash("manifest.torn_record");
  }
  Status s = io_->fs()->Write(*manifest_, manifest_size_, record);
  if (!s.ok()) return s;
  manifest_size_ += record.size();
  ++manifest_records_;
  if (sync) {
    s = io_->SyncNow(*manifest_);
    if (!s.ok()) return s;
  }
  return ApplyLocked(*edit, readers);
}

Status VersionSet::ApplyLocked(const VersionEdit& edit,
                               const std::map<uint64_t, std::shared_ptr<SstReader>>& readers) {
  VersionRef base = current();
  auto v = std::make_shared<Version>();
  v->levels_ = base->levels_;
  for (const auto& d : edit.deleted) {
    auto& l = v->levels_[d.level];
    l.erase(std::remove_if(l.begin(), l.end(),
                           [&](const FileRef& f) { return f->meta.file_id == d.file_id; }),
            l.end());
  }
  for (const auto& m : edit.added) {
    auto fs = std::make_shared<FileState>();
    fs->meta = m;
    fs->reader = readers.at(m.file_id.value);
    v->levels_[m.level].push_back(std::move(fs));
  }
  for (const auto& id : edit.marked_durable) {
    for (auto& l : v->levels_) {
      for (auto& f : l) {
        if (f->meta.file_id == id && f->meta.durability != Durability::kDurable) {
          auto copy = std::make_shared<FileState>(*f);
          copy->meta.durability = Durability::kDurable;
          f = std::move(copy);
        }
      }
    }
  }
  for (const auto& e : edit.ledger_opened) open_entries_[e.epoch.value] = e;
  for (const auto& e : edit.ledger_closed) open_entries_.erase(e.value);
  if (edit.last_seqno && *edit.last_seqno > last_seqno_.load()) {
    last_seqno_.store(*edit.last_seqno);
  }
  SortLevels(&v->levels_);
  std::lock_guard cl(current_mu_);
  current_ = std::move(v);
  return Status::OK();
}

}  // namespace alsm
