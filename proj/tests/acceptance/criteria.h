#pragma once

#include <cstdint>
#include <string>

namespace acceptance {

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Seeded schedules of epoch registration, batch completion (with failures,
// retries and rebuilds), checkups and sweeps against the ledger, checked
// against an independent model of disk and MANIFEST state after every step.
Verdict LedgerScheduleFuzz(uint64_t interleavings, uint64_t seed);

// Randomized merge, SST round-trip and buffer-accounting oracles.
Verdict BuildOracles(uint64_t instances, uint64_t seed);

// Seeded put/overwrite/delete mixes through the C API in every backend,
// compared with a reference map; then seeded point reads across backends.
Verdict OracleEquivalence(uint64_t ops, uint64_t seed, const std::string& work_dir);

// Counts merges that start while an earlier epoch's fsync batch is pending,
// from the engine's schedule log, with a slow simulated fsync.
Verdict PipelinedMerges(uint64_t fsync_us, const std::string& work_dir, uint64_t* pipelined);

// One cold compaction epoch, then idle: the sweep has to retire it in time,
// and a clean close has to leave no volatile files behind.
Verdict ColdEpochRetirement(uint64_t max_age_ms, const std::string& work_dir);

}  // namespace acceptance
