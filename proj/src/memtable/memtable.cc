#include "memtable/memtable.h"

#include <cstring>

namespace alsm {

namespace {

std::string_view EntryKey(const char* entry) {
  return {entry + 4, DecodeFixed32(entry)};
}

std::string_view EntryValue(const char* entry) {
  const uint32_t klen = DecodeFixed32(entry);
  const char* v = entry + 4 + klen;
  return {v + 4, DecodeFixed32(v)};
}

}  // namespace

int MemTable::KeyComparator::operator()(const char* a, const char* b) const {
  return CompareEncodedInternalKeys(EntryKey(a), EntryKey(b));
}

class MemTable::MemIterator : public Iterator {
 public:
  explicit MemIterator(const Table* table) : iter_(table) {}

  bool Valid() const override { return iter_.Valid(); }
  void SeekToFirst() override { iter_.SeekToFirst(); }
  void Seek(std::string_view target) override {
    scratch_.clear();
    PutFixed32(&scratch_, static_cast<uint32_t>(target.size()));
    scratch_.append(target);
    iter_.Seek(scratch_.data());
  }
  void Next() override { iter_.Next(); }
  std::string_view key() const override { return EntryKey(iter_.key()); }
  std::string_view value() const override { return EntryValue(iter_.key()); }
  Status status() const override { return Status::OK(); }

 private:
  Table::Iterator iter_;
  std::string scratch_;
};

MemTable::MemTable() : table_(KeyComparator{}, &arena_) {}

void MemTable::Add(SequenceNumber seq, ValueKind kind, std::string_view user_key,
                   std::string_view value) {
  const size_t ikey_len = user_key.size() + 8;
  const size_t total = 4 + ikey_len + 4 + value.size();
  char* buf = arena_.Allocate(total);
  char* p = buf;
  EncodeFixed32(p, static_cast<uint32_t>(ikey_len));
  p += 4;
  std::memcpy(p, user_key.data(), user_key.size());
  p += user_key.size();
  EncodeFixed64(p, PackTag(seq, kind));
  p += 8;
  EncodeFixed32(p, static_cast<uint32_t>(value.size()));
  p += 4;
  if (!value.empty()) std::memcpy(p, value.data(), value.size());
  table_.Insert(buf);
  charged_.fetch_add(Charge(user_key, value), std::memory_order_relaxed);
  entries_.fetch_add(1, std::memory_order_relaxed);
  if (seq > max_seqno_.load(std::memory_order_relaxed)) {
    max_seqno_.store(seq, std::memory_order_relaxed);
  }
}

bool MemTable::Get(std::string_view user_key, SequenceNumber snapshot, std::string* value,
                   bool* deleted) const {
  std::string target;
  PutFixed32(&target, static_cast<uint32_t>(user_key.size() + 8));
  AppendInternalKey(&target, user_key, snapshot, ValueKind::kPut);
  Table::Iterator it(&table_);
  it.Seek(target.data());
  if (!it.Valid()) return false;
  ParsedInternalKey parsed;
  if (!ParseInternalKey(EntryKey(it.key()), &parsed) || parsed.user_key != user_key) {
    return false;
  }
  *deleted = parsed.kind == ValueKind::kDelete;
  if (!*deleted) value->assign(EntryValue(it.key()));
  return true;
}

std::unique_ptr<Iterator> MemTable::NewIterator() const {
  return std::make_unique<MemIterator>(&table_);
}

}  // namespace alsm
