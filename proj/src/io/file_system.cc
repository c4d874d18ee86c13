#include <cstdio>
#include "io/file_system.h"

#include <dirent.h>
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

namespace alsm::io {

namespace {

Status PosixError(const std::string& context, int err) {
  return Status::IOError(context + ": " + std::strerror(err));
}

}  // namespace

WritableFile::~WritableFile() {
  int fd = fd_.exchange(-1);
  if (fd >= 0) ::close(fd);
}

uint64_t WritableFile::written_bytes() const {
  std::lock_guard l(fs_->mu_);
  return track_->written;
}

uint64_t WritableFile::durable_bytes() const {
  std::lock_guard l(fs_->mu_);
  return track_->durable;
}

Status FileSystem::CreateDir(const std::string& path) {
  if (::mkdir(path.c_str(), 0755) != 0 && errno != EEXIST) {
    return PosixError("mkdir " + path, errno);
  }
  return Status::OK();
}

Status FileSystem::NewWritableFile(const std::string& path,
                                   std::shared_ptr<WritableFile>* out) {
  int fd = ::open(path.c_str(), O_CREAT | O_TRUNC | O_WRONLY | O_CLOEXEC, 0644);
  if (fd < 0) return PosixError("open " + path, errno);
  auto track = std::make_shared<WritableFile::Track>();
  track->created_here = true;
  {
    std::lock_guard l(mu_);
    tracked_[path] = track;
  }
  out->reset(new WritableFile(this, path, fd, std::move(track)));
  return Status::OK();
}

Status FileSystem::Write(WritableFile& f, uint64_t offset, std::string_view data) {
  std::unique_lock l(mu_);
  if (frozen_) {
    // Power loss in progress; the process is about to exit.
    l.unlock();
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
  }
  int fd = f.fd_.load();
  if (fd < 0) return Status::IOError("write to closed file " + f.path_);
  size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::pwrite(fd, data.data() + done, data.size() - done,
                         static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      return PosixError("pwrite " + f.path_, errno);
    }
    done += static_cast<size_t>(n);
  }
  f.track_->written = std::max(f.track_->written, offset + data.size());
  return Status::OK();
}

Status FileSystem::Append(WritableFile& f, std::string_view data) {
  uint64_t offset;
  {
    std::lock_guard l(mu_);
    offset = f.track_->written;
  }
  return Write(f, offset, data);
}

Status FileSystem::Sync(WritableFile& f, bool real_sync) {
  uint64_t upto;
  {
    std::lock_guard l(mu_);
    upto = f.track_->written;
  }
  if (real_sync) {
    int fd = f.fd_.load();
    if (fd < 0) return Status::IOError("sync of closed file " + f.path_);
    if (::fdatasync(fd) != 0) return PosixError("fdatasync " + f.path_, errno);
  }
  MarkDurable(f, upto);
  return Status::OK();
}

void FileSystem::MarkDurable(WritableFile& f, uint64_t upto) {
  std::lock_guard l(mu_);
  if (frozen_) return;
  f.track_->durable = std::max(f.track_->durable, upto);
  f.track_->ever_synced = true;
}

Status FileSystem::Close(WritableFile& f) {
  int fd = f.fd_.exchange(-1);
  if (fd >= 0 && ::close(fd) != 0) return PosixError("close " + f.path_, errno);
  return Status::OK();
}

Status FileSystem::ReadFile(const std::string& path, std::string* out) {
  int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return PosixError("open " + path, errno);
  out->clear();
  char buf[1 << 16];
  while (true) {
    ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      return PosixError("read " + path, err);
    }
    if (n == 0) break;
    out->append(buf, static_cast<size_t>(n));
  }
  ::close(fd);
  return Status::OK();
}

Status FileSystem::RemoveFile(const std::string& path) {
  std::lock_guard l(mu_);
  if (::unlink(path.c_str()) != 0 && errno != ENOENT) {
    return PosixError("unlink " + path, errno);
  }
  tracked_.erase(path);
  return Status::OK();
}

Status FileSystem::RenameFile(const std::string& from, const std::string& to) {
  std::lock_guard l(mu_);
  if (::rename(from.c_str(), to.c_str()) != 0) return PosixError("rename " + from, errno);
  tracked_.erase(to);
  if (auto it = tracked_.find(from); it != tracked_.end()) {
    tracked_[to] = it->second;
    tracked_.erase(it);
  }
  return Status::OK();
}

Status FileSystem::SyncDir(const std::string& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return PosixError("open dir " + dir, errno);
  int rc = ::fsync(fd);
  int err = errno;
  ::close(fd);
  return rc == 0 ? Status::OK() : PosixError("fsync dir " + dir, err);
}

Status FileSystem::SyncPath(const std::string& path, bool real_sync) {
  if (real_sync) {
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) return PosixError("open " + path, errno);
    int rc = ::fdatasync(fd);
    int err = errno;
    ::close(fd);
    if (rc != 0) return PosixError("fdatasync " + path, err);
  }
  std::lock_guard l(mu_);
  if (auto it = tracked_.find(path); it != tracked_.end() && !frozen_) {
    it->second->durable = it->second->written;
    it->second->ever_synced = true;
  }
  return Status::OK();
}

bool FileSystem::FileExists(const std::string& path) {
  return ::access(path.c_str(), F_OK) == 0;
}

Status FileSystem::FileSize(const std::string& path, uint64_t* size) {
  struct stat st;
  if (::stat(path.c_str(), &st) != 0) return PosixError("stat " + path, errno);
  *size = static_cast<uint64_t>(st.st_size);
  return Status::OK();
}

Status FileSystem::ListDir(const std::string& dir, std::vector<std::string>* names) {
  names->clear();
  DIR* d = ::opendir(dir.c_str());
  if (d == nullptr) return PosixError("opendir " + dir, errno);
  while (struct dirent* e = ::readdir(d)) {
    std::string_view n(e->d_name);
    if (n == "." || n == "..") continue;
    names->emplace_back(n);
  }
  ::closedir(d);
  return Status::OK();
}

void FileSystem::SimulatePowerLoss() {
  std::lock_guard l(mu_);
  frozen_ = true;
  for (auto& [path, track] : tracked_) {
    if (track->durable >= track->written) continue;
    if (track->created_here && !track->ever_synced) {
      ::unlink(path.c_str());
    } else {
      if (::truncate(path.c_str(), static_cast<off_t>(track->durable)) != 0) {
        std::fprintf(stderr, "power-loss truncate %s failed\n", path.c_str());
      }
    }
  }
}

}  // namespace alsm::io
