#include "table/sst_reader.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "table/sst_format.h"
#include "util/crc32.h"

namespace alsm {

namespace {

class EmptyIterator : public Iterator {
 public:
  explicit EmptyIterator(Status s) : status_(std::move(s)) {}
  bool Valid() const override { return false; }
  void SeekToFirst() override {}
  void Seek(std::string_view) override {}
  void Next() override {}
  std::string_view key() const override { return {}; }
  std::string_view value() const override { return {}; }
  Status status() const override { return status_; }

 private:
  Status status_;
};

}  // namespace

std::unique_ptr<Iterator> NewEmptyIterator(Status s) {
  return std::make_unique<EmptyIterator>(std::move(s));
}

Status ParseBlock(std::string_view block, std::vector<uint32_t>* offsets) {
  offsets->clear();
  if (block.size() < kBlockTrailerSize) return Status::Corruption("short block");
  const size_t body = block.size() - kBlockTrailerSize;
  const uint32_t count = DecodeFixed32(block.data() + body);
  const uint32_t crc = DecodeFixed32(block.data() + body + 4);
  if (crc32::Value(block.data(), body + 4) != crc) return Status::Corruption("block crc mismatch");
  size_t pos = 0;
  for (uint32_t i = 0; i < count; ++i) {
    if (pos + kEntryHeaderSize > body) return Status::Corruption("block entry overrun");
    const uint32_t klen = DecodeFixed32(block.data() + pos);
    const uint32_t vlen = DecodeFixed32(block.data() + pos + 4);
    if (klen < 8 || pos + kEntryHeaderSize + klen + vlen > body) {
      return Status::Corruption("block entry overrun");
    }
    offsets->push_back(static_cast<uint32_t>(pos));
    pos += kEntryHeaderSize + klen + vlen;
  }
  if (pos != body) return Status::Corruption("block has trailing bytes");
  return Status::OK();
}

namespace {

std::string_view EntryKey(std::string_view block, uint32_t off) {
  const uint32_t klen = DecodeFixed32(block.data() + off);
  return block.substr(off + kEntryHeaderSize, klen);
}

std::string_view EntryValue(std::string_view block, uint32_t off) {
  const uint32_t klen = DecodeFixed32(block.data() + off);
  const uint32_t vlen = DecodeFixed32(block.data() + off + 4);
  return block.substr(off + kEntryHeaderSize + klen, vlen);
}

}  // namespace

SstReader::~SstReader() {
  if (fd_ >= 0) ::close(fd_);
}

Status SstReader::ReadAt(uint64_t offset, size_t n, std::string* out) const {
  out->resize(n);
  size_t done = 0;
  while (done < n) {
    ssize_t r = ::pread(fd_, out->data() + done, n - done, static_cast<off_t>(offset + done));
    if (r < 0) {
      if (errno == EINTR) continue;
      return Status::IOError("pread " + path_ + ": " + std::strerror(errno));
    }
    if (r == 0) return Status::Corruption("unexpected end of file " + path_);
    done += static_cast<size_t>(r);
  }
  return Status::OK();
}

Status SstReader::Open(const std::string& path, std::shared_ptr<SstReader>* out) {
  std::shared_ptr<SstReader> r(new SstReader());
  r->path_ = path;
  r->fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (r->fd_ < 0) return Status::IOError("open " + path + ": " + std::strerror(errno));
  struct stat st;
  if (::fstat(r->fd_, &st) != 0) return Status::IOError("fstat " + path);
  r->file_size_ = static_cast<uint64_t>(st.st_size);
  if (r->file_size_ < kFooterSize) return Status::Corruption("file too short: " + path);

  std::string footer;
  Status s = r->ReadAt(r->file_size_ - kFooterSize, kFooterSize, &footer);
  if (!s.ok()) return s;
  if (std::memcmp(footer.data() + 44, kSstMagic, 4) != 0) {
    return Status::Corruption("bad magic: " + path);
  }
  Decoder d(footer);
  uint64_t index_offset = 0, index_size = 0, meta_offset = 0, meta_size = 0;
  uint32_t checksum = 0;
  d.GetFixed64(&index_offset);
  d.GetFixed64(&index_size);
  d.GetFixed64(&meta_offset);
  d.GetFixed64(&meta_size);
  d.GetFixed64(&r->record_count_);
  d.GetFixed32(&checksum);
  if (index_offset + index_size != meta_offset ||
      meta_offset + meta_size + kFooterSize != r->file_size_ || index_size < kBlockTrailerSize) {
    return Status::Corruption("bad footer offsets: " + path);
  }
  std::string tail;
  s = r->ReadAt(index_offset, index_size + meta_size, &tail);
  if (!s.ok()) return s;
  uint32_t crc = crc32::Value(tail);
  crc = crc32::Extend(crc, footer.data(), 40);
  if (crc != checksum) return Status::Corruption("footer checksum mismatch: " + path);
  r->checksum_ = checksum;

  std::string_view index(tail.data(), index_size);
  const size_t body = index.size() - kBlockTrailerSize;
  const uint32_t count = DecodeFixed32(index.data() + body);
  Decoder id(index.substr(0, body));
  r->blocks_.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    std::string_view key;
    IndexEntry e;
    if (!id.GetLengthPrefixed(&key) || !id.GetFixed64(&e.offset) || !id.GetFixed32(&e.size)) {
      return Status::Corruption("bad index block: " + path);
    }
    e.last_key.assign(key);
    r->blocks_.push_back(std::move(e));
  }

  Decoder md(std::string_view(tail).substr(index_size, meta_size));
  std::string_view smallest, largest;
  if (!md.GetLengthPrefixed(&smallest) || !md.GetLengthPrefixed(&largest) ||
      !md.GetFixed64(&r->min_seqno_) || !md.GetFixed64(&r->max_seqno_)) {
    return Status::Corruption("bad meta block: " + path);
  }
  r->smallest_.assign(smallest);
  r->largest_.assign(largest);
  *out = std::move(r);
  return Status::OK();
}

size_t SstReader::FindBlock(std::string_view target) const {
  auto it = std::lower_bound(blocks_.begin(), blocks_.end(), target,
                             [](const IndexEntry& e, std::string_view t) {
                               return CompareEncodedInternalKeys(e.last_key, t) < 0;
                             });
  return static_cast<size_t>(it - blocks_.begin());
}

Status SstReader::Get(std::string_view user_key, SequenceNumber snapshot, std::string* value,
                      bool* deleted) const {
  const std::string target = MakeInternalKey(user_key, snapshot, ValueKind::kPut);
  const size_t b = FindBlock(target);
  if (b == blocks_.size()) return Status::NotFound();
  std::string block;
  Status s = ReadAt(blocks_[b].offset, blocks_[b].size, &block);
  if (!s.ok()) return s;
  std::vector<uint32_t> offsets;
  s = ParseBlock(block, &offsets);
  if (!s.ok()) return s;
  auto it = std::lower_bound(offsets.begin(), offsets.end(), target,
                             [&](uint32_t off, const std::string& t) {
                               return CompareEncodedInternalKeys(EntryKey(block, off), t) < 0;
                             });
  if (it == offsets.end()) return Status::NotFound();
  ParsedInternalKey parsed;
  if (!ParseInternalKey(EntryKey(block, *it), &parsed)) return Status::Corruption("bad key");
  if (parsed.user_key != user_key) return Status::NotFound();
  *deleted = parsed.kind == ValueKind::kDelete;
  if (!*deleted) value->assign(EntryValue(block, *it));
  return Status::OK();
}

Status SstReader::VerifyContents() const {
  std::string block;
  std::vector<uint32_t> offsets;
  std::string prev;
  uint64_t records = 0;
  for (const auto& b : blocks_) {
    Status s = ReadAt(b.offset, b.size, &block);
    if (!s.ok()) return s;
    s = ParseBlock(block, &offsets);
    if (!s.ok()) return s;
    for (uint32_t off : offsets) {
      std::string_view k = EntryKey(block, off);
      if (!prev.empty() && CompareEncodedInternalKeys(prev, k) >= 0) {
        return Status::Corruption("keys out of order in " + path_);
      }
      prev.assign(k);
      ++records;
    }
    if (!offsets.empty() && prev != b.last_key) {
      return Status::Corruption("index key mismatch in " + path_);
    }
  }
  if (records != record_count_) return Status::Corruption("record count mismatch in " + path_);
  return Status::OK();
}

// Iterates a table block by block. With readahead, a window of several blocks
// is fetched with one pread.
class SstReader::TableIterator : public Iterator {
 public:
  TableIterator(std::shared_ptr<const SstReader> table, size_t readahead)
      : table_(std::move(table)), readahead_(readahead) {}

  bool Valid() const override { return status_.ok() && entry_ < offsets_.size(); }

  void SeekToFirst() override {
    LoadBlock(0);
    entry_ = 0;
    SkipEmptyBlocks();
  }

  void Seek(std::string_view target) override {
    const size_t b = table_->FindBlock(target);
    LoadBlock(b);
    if (!status_.ok() || block_index_ >= table_->blocks_.size()) return;
    auto it = std::lower_bound(offsets_.begin(), offsets_.end(), target,
                               [&](uint32_t off, std::string_view t) {
                                 return CompareEncodedInternalKeys(EntryKey(block_, off), t) < 0;
                               });
    entry_ = static_cast<size_t>(it - offsets_.begin());
    SkipEmptyBlocks();
  }

  void Next() override {
    ++entry_;
    SkipEmptyBlocks();
  }

  std::string_view key() const override { return EntryKey(block_, offsets_[entry_]); }
  std::string_view value() const override { return EntryValue(block_, offsets_[entry_]); }
  Status status() const override { return status_; }

 private:
  void SkipEmptyBlocks() {
    while (status_.ok() && entry_ >= offsets_.size() &&
           block_index_ < table_->blocks_.size()) {
      LoadBlock(block_index_ + 1);
      entry_ = 0;
    }
  }

  void LoadBlock(size_t b) {
    block_index_ = b;
    offsets_.clear();
    entry_ = 0;
    if (b >= table_->blocks_.size()) return;
    const auto& e = table_->blocks_[b];
    if (readahead_ > 0) {
      if (e.offset < window_start_ || e.offset + e.size > window_start_ + window_.size()) {
        const uint64_t end_of_data = table_->blocks_.back().offset + table_->blocks_.back().size;
        const uint64_t len = std::max<uint64_t>(
            e.size, std::min<uint64_t>(readahead_, end_of_data - e.offset));
        status_ = table_->ReadAt(e.offset, len, &window_);
        window_start_ = e.offset;
        if (!status_.ok()) return;
      }
      block_.assign(window_.data() + (e.offset - window_start_), e.size);
    } else {
      status_ = table_->ReadAt(e.offset, e.size, &block_);
      if (!status_.ok()) return;
    }
    status_ = ParseBlock(block_, &offsets_);
  }

  std::shared_ptr<const SstReader> table_;
  size_t readahead_;
  std::string window_;
  uint64_t window_start_ = 0;
  std::string block_;
  std::vector<uint32_t> offsets_;
  size_t block_index_ = 0;
  size_t entry_ = 0;
  Status status_;
};

std::unique_ptr<Iterator> SstReader::NewIterator(size_t readahead) const {
  return std::make_unique<TableIterator>(shared_from_this(), readahead);
}

}  // namespace alsm
