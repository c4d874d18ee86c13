#include "table/sst_builder.h"

#include <cstdio>
#include <thread>

#include "table/sst_format.h"
#include "util/crc32.h"

namespace alsm {

std::string SstFileName(const std::string& dir, FileId id) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "/sst-%06llu.sst", static_cast<unsigned long long>(id.value));
  return dir + buf;
}

std::string BufferPool::Get() {
  {
    std::lock_guard l(mu_);
    if (!free_.empty()) {
      std::string b = std::move(free_.back());
      free_.pop_back();
      b.clear();
      return b;
    }
  }
  std::string b;
  b.reserve(buffer_size_);
  return b;
}

void BufferPool::Put(std::string buf) {
  if (buf.capacity() < buffer_size_) return;
  std::lock_guard l(mu_);
  if (free_.size() < 64) free_.push_back(std::move(buf));
}

SstBuilder::SstBuilder(SstBuilderOptions options, io::IoEngine* io, io::CompletionQueue* cq,
                       BufferPool* pool, std::shared_ptr<io::WritableFile> file, FileId id)
    : options_(options), io_(io), cq_(cq), pool_(pool), file_(std::move(file)), id_(id) {
  buffer_ = pool_->Get();
  block_.reserve(kBlockTargetSize * 2);
}

uint64_t SstBuilder::EstimatedFileSize() const {
  uint64_t size = emitted_ + index_.size() + kBlockTrailerSize + kFooterSize;
  if (block_entries_ > 0) {
    size += block_.size() + kBlockTrailerSize + kIndexEntryFixed + last_key_.size();
  }
  // meta block
  size += 4 + smallest_.size() + 4 + last_key_.size() + 16;
  return size;
}

Status SstBuilder::Add(std::string_view ikey, std::string_view value) {
  if (!status_.ok()) return status_;
  if (finished_) return Status::InvalidArgument("add after finish");
  if (ikey.size() < 8) return status_ = Status::InvalidArgument("malformed internal key");
  if (num_entries_ > 0 && CompareEncodedInternalKeys(last_key_, ikey) >= 0) {
    return status_ = Status::InvalidArgument("keys not strictly increasing");
  }
  if (num_entries_ == 0) smallest_.assign(ikey);
  const SequenceNumber seq = ExtractTag(ikey) >> 8;
  min_seqno_ = std::min(min_seqno_, seq);
  max_seqno_ = std::max(max_seqno_, seq);

  PutFixed32(&block_, static_cast<uint32_t>(ikey.size()));
  PutFixed32(&block_, static_cast<uint32_t>(value.size()));
  block_.append(ikey);
  block_.append(value);
  ++block_entries_;
  ++num_entries_;
  last_key_.assign(ikey);
  if (block_.size() >= kBlockTargetSize) FinishBlock();
  return status_;
}

void SstBuilder::FinishBlock() {
  if (block_entries_ == 0) return;
  PutFixed32(&block_, block_entries_);
  PutFixed32(&block_, crc32::Value(block_));
  const uint64_t offset = emitted_;
  PutFixed32(&index_, static_cast<uint32_t>(last_key_.size()));
  index_.append(last_key_);
  PutFixed64(&index_, offset);
  PutFixed32(&index_, static_cast<uint32_t>(block_.size()));
  ++index_entries_;
  Emit(block_);
  block_.clear();
  block_entries_ = 0;
}

void SstBuilder::Emit(std::string_view bytes) {
  const size_t cap = pool_->buffer_size();
  while (!bytes.empty() && status_.ok()) {
    const size_t room = cap - buffer_.size();
    const size_t n = std::min(room, bytes.size());
    buffer_.append(bytes.data(), n);
    bytes.remove_prefix(n);
    emitted_ += n;
    if (buffer_.size() == cap) status_ = SubmitBuffer();
  }
}

Status SstBuilder::SubmitBuffer() {
  if (buffer_.empty()) return Status::OK();
  const auto start = io::Clock::now();
  const uint64_t offset = submitted_;
  submitted_ += buffer_.size();
  io::ReqId id = 0;
  std::string next = pool_->Get();
  auto req = io::IoRequest::Write(file_, offset, std::move(buffer_));
  buffer_ = std::move(next);
  Status s;
  while (true) {
    s = io_->Submit(std::move(req), cq_, &id);
    if (!s.IsBusy()) break;
    std::this_thread::sleep_for(std::chrono::microseconds(100));
  }
  if (!s.ok()) return s;
  ++buffers_submitted_;
  if (options_.wait_each_buffer) {
    const io::ReqId ids[] = {id};
    auto r = io_->WaitAll(*cq_, ids);
    for (auto& ev : r.events) {
      if (!ev.status.ok()) s = ev.status;
      pool_->Put(std::move(ev.buffer));
    }
  } else {
    pending_.push_back(id);
  }
  io_wait_ += io::Clock::now() - start;
  return s;
}

Status SstBuilder::Finish(SstMeta* meta) {
  if (!status_.ok()) return status_;
  if (finished_) return Status::InvalidArgument("finish called twice");
  if (num_entries_ == 0) return Status::InvalidArgument("empty table");
  FinishBlock();

  PutFixed32(&index_, index_entries_);
  PutFixed32(&index_, crc32::Value(index_));
  std::string metablock;
  PutLengthPrefixed(&metablock, smallest_);
  PutLengthPrefixed(&metablock, last_key_);
  PutFixed64(&metablock, min_seqno_);
  PutFixed64(&metablock, max_seqno_);

  const uint64_t index_offset = emitted_;
  const uint64_t meta_offset = index_offset + index_.size();
  std::string footer;
  PutFixed64(&footer, index_offset);
  PutFixed64(&footer, index_.size());
  PutFixed64(&footer, meta_offset);
  PutFixed64(&footer, metablock.size());
  PutFixed64(&footer, num_entries_);
  uint32_t crc = crc32::Value(index_);
  crc = crc32::Extend(crc, metablock.data(), metablock.size());
  crc = crc32::Extend(crc, footer.data(), footer.size());
  PutFixed32(&footer, crc);
  footer.append(kSstMagic, 4);

  Emit(index_);
  Emit(metablock);
  Emit(footer);
  if (status_.ok()) status_ = SubmitBuffer();
  finished_ = true;
  if (!status_.ok()) return status_;

  meta->file_id = id_;
  meta->smallest = smallest_;
  meta->largest = last_key_;
  meta->file_size = emitted_;
  meta->checksum = crc;
  meta->record_count = num_entries_;
  meta->max_seqno = max_seqno_;
  return Status::OK();
}

}  // namespace alsm
