#include "compaction/rebuild.h"

#include "table/merge_iterator.h"
#include "table/sst_builder.h"
#include "table/sst_format.h"
#include "table/sst_reader.h"

namespace alsm {

Status RebuildFromParents(const std::string& dir, io::IoEngine* io,
                          const std::vector<SstMeta>& parents, const SstMeta& target,
                          bool drop_tombstones, size_t buffer_size) {
  std::vector<std::shared_ptr<SstReader>> readers;
  std::vector<std::unique_ptr<Iterator>> children;
  for (const auto& p : parents) {
    std::shared_ptr<SstReader> r;
    Status s = SstReader::Open(SstFileName(dir, p.file_id), &r);
    if (!s.ok()) return Status::Corruption("parent unavailable for rebuild: " + s.ToString());
    children.push_back(r->NewIterator(buffer_size));
    readers.push_back(std::move(r));
  }
  MergeOptions mo;
  mo.drop_tombstones = drop_tombstones;
  auto it = NewMergeIterator(std::move(children), mo);

  const std::string final_path = SstFileName(dir, target.file_id);
  const std::string tmp_path = final_path + ".rebuild";
  std::shared_ptr<io::WritableFile> file;
  Status s = io->fs()->NewWritableFile(tmp_path, &file);
  if (!s.ok()) return s;

  io::CompletionQueue cq;
  BufferPool pool(buffer_size);
  SstBuilderOptions bo;
  bo.target_file_size = UINT64_MAX;
  bo.wait_each_buffer = true;
  SstBuilder builder(bo, io, &cq, &pool, file, target.file_id);
  for (it->Seek(target.smallest); it->Valid(); it->Next()) {
    if (CompareEncodedInternalKeys(it->key(), target.largest) > 0) break;
    s = builder.Add(it->key(), it->value());
    if (!s.ok()) break;
  }
  if (s.ok()) s = it->status();
  SstMeta rebuilt;
  if (s.ok()) s = builder.Finish(&rebuilt);
  if (s.ok() && (rebuilt.checksum != target.checksum || rebuilt.file_size != target.file_size)) {
    s = Status::Corruption("rebuilt file differs from the recorded offspring " +
                           std::to_string(target.file_id.value));
  }
  if (s.ok()) s = io->SyncNow(*file);
  io->fs()->Close(*file);
  if (s.ok()) s = io->fs()->RenameFile(tmp_path, final_path);
  if (s.ok()) s = io->fs()->SyncDir(dir);
  if (!s.ok()) io->fs()->RemoveFile(tmp_path);
  return s;
}

}  // namespace alsm
