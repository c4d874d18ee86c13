#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "io/io_engine.h"
#include "version/file_meta.h"

namespace alsm {

// Recycles 1 MiB write buffers. A buffer returns here only after the I/O
// engine handed it back in a completion event.
class BufferPool {
 public:
  explicit BufferPool(size_t buffer_size) : buffer_size_(buffer_size) {}

  std::string Get();
  void Put(std::string buf);
  size_t buffer_size() const { return buffer_size_; }

 private:
  const size_t buffer_size_;
  std::mutex mu_;
  std::vector<std::string> free_;
};

struct SstBuilderOptions {
  uint64_t target_file_size = 64ull << 20;
  // In wait_each_buffer mode every submission is awaited before the builder
  // continues (conventional compaction); otherwise writes stay in flight.
  bool wait_each_buffer = false;
};

// Streams sorted records into an SST file through merge-buffer handoffs to
// the I/O engine. Each full buffer becomes one write request.
class SstBuilder {
 public:
  SstBuilder(SstBuilderOptions options, io::IoEngine* io, io::CompletionQueue* cq,
             BufferPool* pool, std::shared_ptr<io::WritableFile> file, FileId id);
  SstBuilder(const SstBuilder&) = delete;
  SstBuilder& operator=(const SstBuilder&) = delete;

  // Keys must be strictly increasing under internal-key order; an unsorted
  // key aborts the build with InvalidArgument.
  Status Add(std::string_view ikey, std::string_view value);

  // True once the file (as if finished now) reaches the target size.
  bool Full() const { return EstimatedFileSize() >= options_.target_file_size; }

  // Writes the final block, index, meta and footer and submits the tail
  // buffer. Fills *meta (level, durability and epoch are left to the caller).
  Status Finish(SstMeta* meta);

  // Exact size of the file if Finish() were called now.
  uint64_t EstimatedFileSize() const;
  uint64_t NumEntries() const { return num_entries_; }

  // Write requests not yet awaited by the builder itself.
  const std::vector<io::ReqId>& pending_writes() const { return pending_; }
  uint64_t buffers_submitted() const { return buffers_submitted_; }
  std::chrono::nanoseconds io_wait_time() const { return io_wait_; }
  const std::shared_ptr<io::WritableFile>& file() const { return file_; }
  FileId file_id() const { return id_; }

 private:
  void FinishBlock();
  void Emit(std::string_view bytes);
  Status SubmitBuffer();
  Status status() const { return status_; }

  SstBuilderOptions options_;
  io::IoEngine* io_;
  io::CompletionQueue* cq_;
  BufferPool* pool_;
  std::shared_ptr<io::WritableFile> file_;
  FileId id_;

  std::string block_;
  uint32_t block_entries_ = 0;
  std::string index_;
  uint32_t index_entries_ = 0;
  std::string last_key_;
  std::string smallest_;
  SequenceNumber min_seqno_ = kMaxSequenceNumber;
  SequenceNumber max_seqno_ = 0;
  uint64_t num_entries_ = 0;

  std::string buffer_;
  uint64_t emitted_ = 0;    // bytes handed to buffers so far
  uint64_t submitted_ = 0;  // file offset of the current buffer
  uint64_t buffers_submitted_ = 0;
  std::vector<io::ReqId> pending_;
  std::chrono::nanoseconds io_wait_{0};
  Status status_;
  bool finished_ = false;
};

}  // namespace alsm
