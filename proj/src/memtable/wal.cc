#include "memtable/wal.h"

#include <cstdio>

#include "util/crc32.h"

namespace alsm {

void EncodeWalRecord(const WalRecord& rec, std::string* dst) {
  const size_t body = kWalBodyFixedSize + rec.user_key.size() + rec.value.size();
  const size_t start = dst->size();
  dst->resize(start + kWalHeaderSize);
  PutFixed64(dst, rec.seqno);
  PutFixed8(dst, static_cast<uint8_t>(rec.kind));
  PutFixed32(dst, static_cast<uint32_t>(rec.user_key.size()));
  PutFixed32(dst, static_cast<uint32_t>(rec.value.size()));
  dst->append(rec.user_key);
  dst->append(rec.value);
  char* hdr = dst->data() + start;
  EncodeFixed32(hdr, static_cast<uint32_t>(body));
  EncodeFixed32(hdr + 4, crc32::Value(hdr + kWalHeaderSize, body));
}

std::string WalFileName(const std::string& dir, FileId segment) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "/wal-%06llu.log",
                static_cast<unsigned long long>(segment.value));
  return dir + buf;
}

Status WalWriter::Create(io::IoEngine* io, const std::string& dir, FileId segment,
                         std::unique_ptr<WalWriter>* out) {
  std::shared_ptr<io::WritableFile> file;
  Status s = io->fs()->NewWritableFile(WalFileName(dir, segment), &file);
  if (!s.ok()) return s;
  *out = std::make_unique<WalWriter>(io, segment, std::move(file));
  return Status::OK();
}

Status WalWriter::Append(const WalRecord& rec, bool sync) {
  scratch_.clear();
  EncodeWalRecord(rec, &scratch_);
  Status s = io_->fs()->Write(*file_, size_, scratch_);
  if (!s.ok()) return s;
  size_ += scratch_.size();
  return sync ? Sync() : Status::OK();
}

Status WalWriter::Sync() { return io_->SyncNow(*file_); }

Status WalWriter::Close() { return io_->fs()->Close(*file_); }

Status ReplayWal(const std::string& data, const std::function<void(const WalRecord&)>& fn,
                 WalReplayStats* stats) {
  std::string_view in(data);
  SequenceNumber last = 0;
  while (!in.empty()) {
    if (in.size() < kWalHeaderSize) {
      stats->torn_tail = true;
      break;
    }
    const uint32_t len = DecodeFixed32(in.data());
    const uint32_t crc = DecodeFixed32(in.data() + 4);
    if (len < kWalBodyFixedSize || in.size() - kWalHeaderSize < len) {
      stats->torn_tail = true;
      break;
    }
    std::string_view body = in.substr(kWalHeaderSize, len);
    if (crc32::Value(body) != crc) {
      stats->torn_tail = true;
      break;
    }
    Decoder d(body);
    WalRecord rec;
    uint8_t kind;
    uint32_t klen, vlen;
    d.GetFixed64(&rec.seqno);
    d.GetFixed8(&kind);
    d.GetFixed32(&klen);
    d.GetFixed32(&vlen);
    if (kind > 1 || d.remaining() != static_cast<size_t>(klen) + vlen ||
        rec.seqno <= last) {
      stats->torn_tail = true;
      break;
    }
    rec.kind = static_cast<ValueKind>(kind);
    d.GetBytes(klen, &rec.user_key);
    d.GetBytes(vlen, &rec.value);
    fn(rec);
    last = rec.seqno;
    ++stats->records;
    in.remove_prefix(kWalHeaderSize + len);
  }
  return Status::OK();
}

}  // namespace alsm
