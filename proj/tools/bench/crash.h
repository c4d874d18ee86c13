#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine.h"

namespace bench {

struct CrashCase {
  std::string point;
  uint64_t seed = 1;
  bool wal_fsync_each_write = true;
  // "sync" runs blocking compaction I/O; "async" runs the pipelined path on
  // the simulated device.
  std::string mode = "async";
};

struct CrashVerdict {
  CrashCase c;
  uint64_t nth = 0;             // hit that crashed the child
  bool crashed = false;
  uint64_t acked = 0;           // operations acknowledged before the crash
  uint64_t flushed_seqno = 0;   // flushed prefix at the moment of the crash
  uint64_t recovered_seqno = 0;
  uint64_t lost_acked = 0;      // acknowledged operations missing after recovery
  uint64_t state_mismatches = 0;
  bool pass = false;
  std::string detail;
  double seconds = 0;

  nlohmann::json ToJson() const;
};

struct CrashOptions {
  uint64_t ops = 40000;
  uint64_t key_space = 4000;
  // Extra settings applied to the engine in both child and verifier.
  Settings base;
  std::string work_dir;  // parent of the scratch directories
};

// Crash points a run can reach. Synchronous compaction never opens ledger
// entries, so the pipelined-commit and ledger points apply only to "async".
// An empty mode lists every point.
std::vector<std::string> CrashPoints(bool wal_fsync_each_write, const std::string& mode = "");

// Forks a child that runs the seeded operation stream with the point armed,
// lets it die at the hit, recovers in this process and checks the recovered
// state against the operation prefix it claims.
CrashVerdict RunCrashCase(const CrashCase& c, const CrashOptions& opts);

}  // namespace bench
