#include "db/db_iter.h"

#include "table/merge_iterator.h"
#include "table/sst_reader.h"

namespace alsm {

namespace {

class UserIterator : public Iterator {
 public:
  UserIterator(std::vector<std::shared_ptr<MemTable>> mems, VersionRef version,
               std::unique_ptr<Iterator> merged, SequenceNumber snapshot)
      : mems_(std::move(mems)),
        version_(std::move(version)),
        merged_(std::move(merged)),
        snapshot_(snapshot) {}

  bool Valid() const override { return merged_->Valid(); }
  void SeekToFirst() override { merged_->SeekToFirst(); }
  void Seek(std::string_view user_key) override {
    merged_->Seek(MakeInternalKey(user_key, snapshot_, ValueKind::kPut));
  }
  void Next() override { merged_->Next(); }
  std::string_view key() const override { return ExtractUserKey(merged_->key()); }
  std::string_view value() const override { return merged_->value(); }
  Status status() const override { return merged_->status(); }

 private:
  std::vector<std::shared_ptr<MemTable>> mems_;
  VersionRef version_;
  std::unique_ptr<Iterator> merged_;
  SequenceNumber snapshot_;
};

}  // namespace

std::unique_ptr<Iterator> NewUserIterator(std::vector<std::shared_ptr<MemTable>> mems,
                                          VersionRef version, SequenceNumber snapshot,
                                          size_t readahead) {
  std::vector<std::unique_ptr<Iterator>> children;
  for (const auto& m : mems) children.push_back(m->NewIterator());
  for (int level = 0; level < kNumLevels; ++level) {
    for (const auto& f : version->files(level)) children.push_back(f->reader->NewIterator(readahead));
  }
  MergeOptions mo;
  mo.drop_tombstones = true;
  mo.snapshot = snapshot;
  auto merged = NewMergeIterator(std::move(children), mo);
  return std::make_unique<UserIterator>(std::move(mems), std::move(version), std::move(merged),
                                        snapshot);
}

}  // namespace alsm
