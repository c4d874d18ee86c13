#include "ledger/recovery.h"

#include "compaction/rebuild.h"
#include "table/sst_format.h"
#include "table/sst_reader.h"

namespace alsm {

namespace {

bool OffspringIntact(const std::string& path, const SstMeta& meta) {
  std::shared_ptr<SstReader> r;
  if (!SstReader::Open(path, &r).ok()) return false;
  if (r->checksum() != meta.checksum || r->file_size() != meta.file_size) return false;
  return r->VerifyContents().ok();
}

SstMeta* FindLive(ReplayedState* state, FileId id) {
  for (auto& level : state->levels) {
    if (auto it = level.find(id.value); it != level.end()) return &it->second;
  }
  return nullptr;
}

}  // namespace

Status ResolveOpenLedgerEntries(const std::string& dir, io::IoEngine* io, size_t buffer_size,
                                ReplayedState* state, RecoveryReport* report) {
  // Epoch order: an older entry's offspring may be a younger entry's parents.
  while (!state->open_entries.empty()) {
    auto it = state->open_entries.begin();
    const LedgerOpenRecord& e = it->second;
    for (const auto& id : e.offspring) {
      SstMeta* meta = FindLive(state, id);
      if (meta == nullptr) {
        // Consumed by a later compaction, which only commits after this
        // entry retires; reaching here means the MANIFEST is inconsistent.
        return Status::Corruption("open ledger entry " + std::to_string(e.epoch.value) +
                                  " lists offspring " + std::to_string(id.value) +
                                  " that is not live");
      }
      const std::string path = SstFileName(dir, id);
      if (OffspringIntact(path, *meta)) {
        ++report->offspring_verified;
      } else {
        Status s = RebuildFromParents(dir, io, e.parents, *meta, e.drop_tombstones, buffer_size);
        if (!s.ok()) return s;
        ++report->offspring_rebuilt;
      }
      Status s = io->fs()->SyncPath(path, io->options().real_fsync);
      if (!s.ok()) return s;
      meta->durability = Durability::kDurable;
    }
    ++report->entries_resolved;
    state->open_entries.erase(it);
  }
  return Status::OK();
}

}  // namespace alsm
