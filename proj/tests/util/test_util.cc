#include "util/test_util.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "table/sst_builder.h"

namespace alsm::test {

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "alsm-test-XXXXXX").string();
  char* p = ::mkdtemp(tmpl.data());
  if (p == nullptr) std::abort();
  path_ = p;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

EngineConfig SmallConfig(IoBackend backend) {
  EngineConfig c;
  c.memtable_limit = 256 << 10;
  c.sst_target_size = 256 << 10;
  c.merge_buffer_size = 64 << 10;
  c.base_level_size = 1 << 20;
  c.l0_compaction_trigger = 4;
  c.io_backend = backend;
  c.real_fsync = false;
  c.ledger_sweep_interval = std::chrono::milliseconds(100);
  return c;
}

std::string RandomBytes(std::mt19937_64& rng, size_t n) {
  std::string s(n, '\0');
  for (auto& ch : s) ch = static_cast<char>('a' + rng() % 26);
  return s;
}

std::string KeyOf(uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "key%013llu", static_cast<unsigned long long>(i));
  return buf;
}

namespace {

class VectorIterator : public Iterator {
 public:
  explicit VectorIterator(Records records) : records_(std::move(records)) {}
  bool Valid() const override { return pos_ < records_.size(); }
  void SeekToFirst() override { pos_ = 0; }
  void Seek(std::string_view target) override {
    pos_ = std::lower_bound(records_.begin(), records_.end(), target,
                            [](const auto& r, std::string_view t) {
                              return CompareEncodedInternalKeys(r.first, t) < 0;
                            }) -
           records_.begin();
  }
  void Next() override { ++pos_; }
  std::string_view key() const override { return records_[pos_].first; }
  std::string_view value() const override { return records_[pos_].second; }
  Status status() const override { return Status::OK(); }

 private:
  Records records_;
  size_t pos_ = 0;
};

}  // namespace

std::unique_ptr<Iterator> NewVectorIterator(Records records) {
  return std::make_unique<VectorIterator>(std::move(records));
}

void SortRecords(Records* records) {
  std::sort(records->begin(), records->end(), [](const auto& a, const auto& b) {
    return CompareEncodedInternalKeys(a.first, b.first) < 0;
  });
}

Records Collect(Iterator* it) {
  Records out;
  for (it->SeekToFirst(); it->Valid(); it->Next()) out.emplace_back(it->key(), it->value());
  return out;
}

Status BuildSst(io::IoEngine* io, const std::string& path, FileId id, const Records& records,
                size_t buffer_size, BuiltSst* out) {
  std::shared_ptr<io::WritableFile> file;
  Status s = io->fs()->NewWritableFile(path, &file);
  if (!s.ok()) return s;
  io::CompletionQueue cq;
  BufferPool pool(buffer_size);
  SstBuilderOptions bo;
  bo.target_file_size = UINT64_MAX;
  std::vector<io::ReqId> ids;
  {
    SstBuilder builder(bo, io, &cq, &pool, file, id);
    for (const auto& [k, v] : records) {
      s = builder.Add(k, v);
      if (!s.ok()) break;
    }
    if (s.ok()) s = builder.Finish(&out->meta);
    ids = builder.pending_writes();
    out->buffers_submitted = builder.buffers_submitted();
  }
  for (auto& ev : io->WaitAll(cq, ids).events) {
    if (!ev.status.ok() && s.ok()) s = ev.status;
  }
  if (!s.ok()) return s;
  io::ReqId fid = 0;
  s = io->Submit(io::IoRequest::Fsync(file), &cq, &fid);
  if (!s.ok()) return s;
  const io::ReqId fids[] = {fid};
  for (auto& ev : io->WaitAll(cq, fids).events) {
    if (!ev.status.ok()) s = ev.status;
  }
  io->fs()->Close(*file);
  out->path = path;
  return s;
}

}  // namespace alsm::test
