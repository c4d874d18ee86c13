#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "util/status.h"

namespace alsm::io {

class FileSystem;

// Append-oriented writable file. Durability state is tracked by the owning
// FileSystem so that a power loss can be emulated at any instant.
class WritableFile {
 public:
  ~WritableFile();
  WritableFile(const WritableFile&) = delete;
  WritableFile& operator=(const WritableFile&) = delete;

  const std::string& path() const { return path_; }
  bool closed() const { return fd_.load() < 0; }
  uint64_t written_bytes() const;
  uint64_t durable_bytes() const;

 private:
  friend class FileSystem;
  struct Track {
    uint64_t written = 0;  // high-water mark of bytes written
    uint64_t durable = 0;  // bytes covered by the last completed sync
    bool ever_synced = false;
    bool created_here = false;
  };

  WritableFile(FileSystem* fs, std::string path, int fd, std::shared_ptr<Track> track)
      : fs_(fs), path_(std::move(path)), fd_(fd), track_(std::move(track)) {}

  FileSystem* fs_;
  std::string path_;
  std::atomic<int> fd_;
  std::shared_ptr<Track> track_;
};

// Thin POSIX layer. Every mutation of file contents goes through here so that
// SimulatePowerLoss() can cut each file back to its last synced length.
class FileSystem {
 public:
  FileSystem() = default;
  FileSystem(const FileSystem&) = delete;
  FileSystem& operator=(const FileSystem&) = delete;

  Status CreateDir(const std::string& path);
  Status NewWritableFile(const std::string& path, std::shared_ptr<WritableFile>* out);

  Status Write(WritableFile& f, uint64_t offset, std::string_view data);
  Status Append(WritableFile& f, std::string_view data);
  // Makes everything written so far durable. With real_sync=false only the
  // bookkeeping is updated.
  Status Sync(WritableFile& f, bool real_sync);
  // Bookkeeping-only variant used when a sync completes asynchronously:
  // marks `upto` bytes durable.
  void MarkDurable(WritableFile& f, uint64_t upto);
  Status Close(WritableFile& f);

  Status ReadFile(const std::string& path, std::string* out);
  Status RemoveFile(const std::string& path);
  Status RenameFile(const std::string& from, const std::string& to);
  Status SyncDir(const std::string& dir);
  // Syncs a file by path (files left behind by an earlier process).
  Status SyncPath(const std::string& path, bool real_sync);
  bool FileExists(const std::string& path);
  Status FileSize(const std::string& path, uint64_t* size);
  Status ListDir(const std::string& dir, std::vector<std::string>* names);

  // Discards every byte that was written but not synced; files created and
  // never synced disappear. Blocks all further writes. Used by crash hooks.
  void SimulatePowerLoss();

 private:
  friend class WritableFile;
  mutable std::mutex mu_;
  bool frozen_ = false;
  std::unordered_map<std::string, std::shared_ptr<WritableFile::Track>> tracked_;
};

}  // namespace alsm::io
