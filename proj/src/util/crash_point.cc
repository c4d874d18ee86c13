#include "util/crash_point.h"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <mutex>

#include "io/file_system.h"

namespace alsm::crash {

namespace {

struct State {
  std::mutex mu;
  std::string name;
  uint64_t nth = 0;
  uint64_t hits = 0;
  io::FileSystem* fs = nullptr;
  std::function<std::string()> reporter;
};

State& Get() {
  static State* s = new State();
  return *s;
}

std::atomic<bool> g_armed{false};

}  // namespace

void ConfigureFromEnv() {
  const char* v = std::getenv("AISLSM_CRASH_POINT");
  if (v == nullptr || *v == '\0') return;
  std::string spec(v);
  uint64_t nth = 1;
  if (auto colon = spec.rfind(':'); colon != std::string::npos) {
    nth = std::strtoull(spec.c_str() + colon + 1, nullptr, 10);
    spec.resize(colon);
  }
  Configure(spec, nth == 0 ? 1 : nth);
}

void Configure(std::string name, uint64_t nth) {
  State& s = Get();
  std::lock_guard l(s.mu);
  s.name = std::move(name);
  s.nth = nth;
  s.hits = 0;
  g_armed.store(true);
}

void Disarm() {
  State& s = Get();
  std::lock_guard l(s.mu);
  s.name.clear();
  g_armed.store(false);
}

void SetFileSystem(io::FileSystem* fs) {
  State& s = Get();
  std::lock_guard l(s.mu);
  s.fs = fs;
}

void SetReporter(std::function<std::string()> fn) {
  State& s = Get();
  std::lock_guard l(s.mu);
  s.reporter = std::move(fn);
}

bool Armed(std::string_view name) {
  if (!g_armed.load(std::memory_order_relaxed)) return false;
  State& s = Get();
  std::lock_guard l(s.mu);
  if (s.name != name) return false;
  return ++s.hits == s.nth;
}

void Crash(std::string_view name) {
  State& s = Get();
  std::function<std::string()> reporter;
  io::FileSystem* fs;
  {
    std::lock_guard l(s.mu);
    reporter = s.reporter;
    fs = s.fs;
  }
  std::string report = "point=" + std::string(name) + "\n";
  if (reporter) report += reporter();
  if (const char* path = std::getenv("AISLSM_CRASH_REPORT"); path != nullptr && *path != '\0') {
    int fd = ::open(path, O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd >= 0) {
      ssize_t off = 0;
      while (off < static_cast<ssize_t>(report.size())) {
        ssize_t n = ::write(fd, report.data() + off, report.size() - off);
        if (n <= 0) break;
        off += n;
      }
      ::fsync(fd);
      ::close(fd);
    }
  }
  if (fs != nullptr) fs->SimulatePowerLoss();
  ::_exit(kCrashExitCode);
}

const std::vector<std::string>& KnownPoints() {
  static const std::vector<std::string> points = {
      "wal.after_append",
      "wal.after_sync",
      "memtable.after_rotate",
      "flush.after_build",
      "flush.after_fsync",
      "flush.after_manifest",
      "compaction.after_checkup",
      "compaction.after_write_submit",
      "compaction.after_writes_complete",
      "compaction.after_ledger_open",
      "compaction.after_fsync_submit",
      "ledger.after_mark_durable",
      "ledger.after_parent_delete",
      "ledger.after_close",
      "manifest.torn_record",
  };
  return points;
}

}  // namespace alsm::crash
