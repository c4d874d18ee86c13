#include "crash.h"

#include <sys/mman.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <new>
#include <random>
#include <set>
#include <sstream>

namespace bench {

namespace {

constexpr int kCrashExitCode = 86;

struct Op {
  bool del;
  std::string key;
  std::string value;
};

std::vector<Op> MakeOps(uint64_t seed, uint64_t n, uint64_t key_space) {
  std::mt19937_64 rng(seed);
  std::vector<Op> ops;
  ops.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    Op op;
    op.key = "ck" + std::to_string(rng() % key_space);
    op.del = rng() % 10 == 0;
    if (!op.del) {
      op.value.resize(100 + rng() % 500);
      for (auto& ch : op.value) ch = static_cast<char>('a' + rng() % 26);
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

std::map<std::string, std::string> ApplyPrefix(const std::vector<Op>& ops, uint64_t n) {
  std::map<std::string, std::string> m;
  for (uint64_t i = 0; i < n && i < ops.size(); ++i) {
    if (ops[i].del) {
      m.erase(ops[i].key);
    } else {
      m[ops[i].key] = ops[i].value;
    }
  }
  return m;
}

std::map<std::string, std::string> ReadReport(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (auto eq = line.find('='); eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// First hit to try for a point. Per-write points get a hit spread across the
// run; rarer events get small counts so the child reaches them.
uint64_t InitialHit(const std::string& point, uint64_t seed, uint64_t ops) {
  std::mt19937_64 rng(seed ^ std::hash<std::string>()(point));
  if (point.rfind("wal.", 0) == 0) return 1 + rng() % (ops * 9 / 10);
  if (point.rfind("memtable.", 0) == 0 || point.rfind("flush.", 0) == 0) return 1 + rng() % 60;
  if (point == "manifest.torn_record") return 1 + rng() % 100;
  return 1 + rng() % 12;
}

Settings CaseSettings(const CrashCase& c, const CrashOptions& opts) {
  Settings s;
  s.Set("memtable_limit", "64K");
  s.Set("sst_target_size", "64K");
  s.Set("merge_buffer_size", "16K");
  s.Set("base_level_size", "256K");
  s.Set("l0_compaction_trigger", "4");
  s.Set("io.real_fsync", "false");
  s.Set("wal_fsync_each_write", c.wal_fsync_each_write ? "true" : "false");
  if (c.mode == "sync") {
    s.Set("io.backend", "sync");
  } else {
    s.Set("io.backend", "sim");
    // Every synced WAL append pays this too, so keep it short.
    s.Set("io.sim_fsync_latency_us", "300");
  }
  for (const auto& [k, v] : opts.base.values()) s.Set(k, v);
  return s;
}

}  // namespace

std::vector<std::string> CrashPoints(bool wal_fsync_each_write, const std::string& mode) {
  static const std::set<std::string> kAsyncOnly = {
      "compaction.after_checkup",  "compaction.after_ledger_open", "compaction.after_fsync_submit",
      "ledger.after_mark_durable", "ledger.after_parent_delete",   "ledger.after_close"};
  char* raw = alsm_crash_points();
  std::string all = raw == nullptr ? "" : raw;
  alsm_free(raw);
  std::vector<std::string> out;
  std::istringstream in(all);
  std::string p;
  while (std::getline(in, p)) {
    if (p.empty()) continue;
    if (p == "wal.after_sync" && !wal_fsync_each_write) continue;
    if (mode == "sync" && kAsyncOnly.count(p)) continue;
    out.push_back(p);
  }
  return out;
}

nlohmann::json CrashVerdict::ToJson() const {
  return {{"point", c.point},
          {"seed", c.seed},
          {"mode", c.mode},
          {"wal_fsync_each_write", c.wal_fsync_each_write},
          {"hit", nth},
          {"crashed", crashed},
          {"acked", acked},
          {"flushed_seqno", flushed_seqno},
          {"recovered_seqno", recovered_seqno},
          {"lost_acked", lost_acked},
          {"state_mismatches", state_mismatches},
          {"pass", pass},
          {"detail", detail},
          {"seconds", seconds}};
}

CrashVerdict RunCrashCase(const CrashCase& c, const CrashOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  CrashVerdict v;
  v.c = c;
  const std::vector<Op> ops = MakeOps(c.seed, opts.ops, opts.key_space);
  const Settings settings = CaseSettings(c, opts);

  auto* acked = static_cast<std::atomic<uint64_t>*>(
      mmap(nullptr, sizeof(std::atomic<uint64_t>), PROT_READ | PROT_WRITE, MAP_SHARED | MAP_ANONYMOUS, -1, 0));
  if (acked == MAP_FAILED) throw std::runtime_error("mmap failed");

  ScratchDir scratch(opts.work_dir);
  const std::string db_dir = scratch.path() + "/db";
  const std::string report = scratch.path() + "/crash-report";
  uint64_t nth = InitialHit(c.point, c.seed, opts.ops);

  while (true) {
    std::error_code ec;
    std::filesystem::remove_all(db_dir, ec);
    std::filesystem::remove(report, ec);
    new (acked) std::atomic<uint64_t>(0);

    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
      const std::string arm = c.point + ":" + std::to_string(nth);
      setenv("AISLSM_CRASH_POINT", arm.c_str(), 1);
      setenv("AISLSM_CRASH_REPORT", report.c_str(), 1);
      try {
        Engine engine(settings, db_dir);
        for (uint64_t i = 0; i < ops.size(); ++i) {
          if (ops[i].del) {
            engine.Delete(ops[i].key);
          } else {
            engine.Put(ops[i].key, ops[i].value);
          }
          acked->store(i + 1, std::memory_order_release);
        }
        engine.Close();
      } catch (...) {
        _exit(3);
      }
      _exit(0);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status) && WEXITSTATUS(status) == kCrashExitCode) {
      v.crashed = true;
      break;
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      v.detail = "child failed with status " + std::to_string(status);
      munmap(acked, sizeof(*acked));
      v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return v;
    }
    if (nth == 1) break;  // the run never reaches this point
    nth = (nth + 1) / 2;
  }
  v.nth = nth;
  v.acked = acked->load(std::memory_order_acquire);
  munmap(acked, sizeof(*acked));

  if (!v.crashed) {
    v.detail = "point never reached";
  } else {
    const auto rep = ReadReport(report);
    if (auto it = rep.find("flushed_seqno"); it != rep.end()) v.flushed_seqno = std::stoull(it->second);
    try {
      Engine engine(settings, db_dir);
      v.recovered_seqno = engine.LastSeqno();
      const auto got = engine.Scan();
      const std::string invariants = engine.Property("alsm.invariants");
      engine.Close();

      // Every operation consumes one sequence number, so the recovered
      // sequence number names the prefix the state must equal. The one
      // operation in flight at the crash may or may not have landed.
      const uint64_t lower = c.wal_fsync_each_write ? v.acked : v.flushed_seqno;
      const uint64_t upper = std::min<uint64_t>(v.acked + 1, ops.size());
      if (v.recovered_seqno < v.acked && c.wal_fsync_each_write) v.lost_acked = v.acked - v.recovered_seqno;
      const auto expect = ApplyPrefix(ops, v.recovered_seqno);
      for (const auto& [k, val] : expect) {
        auto it = got.find(k);
        if (it == got.end() || it->second != val) ++v.state_mismatches;
      }
      for (const auto& [k, val] : got) {
        if (!expect.count(k)) ++v.state_mismatches;
      }
      std::ostringstream d;
      if (v.recovered_seqno < lower || v.recovered_seqno > upper) {
        d << "recovered seqno " << v.recovered_seqno << " outside [" << lower << ", " << upper << "]; ";
      }
      if (v.state_mismatches > 0) d << v.state_mismatches << " keys differ from the prefix; ";
      if (invariants != "ok") d << "invariants: " << invariants << "; ";
      v.detail = d.str();
      v.pass = v.detail.empty();
    } catch (const std::exception& e) {
      v.detail = std::string("recovery failed: ") + e.what();
    }
  }
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return v;
}

}  // namespace bench
