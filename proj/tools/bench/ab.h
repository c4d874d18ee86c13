#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "engine.h"
#include "workload.h"

namespace bench {

// Latency model applied by both modes of an A/B run.
struct DeviceProfile {
  std::string name;
  uint64_t write_us_per_mib = 0;
  uint64_t fsync_us = 0;
  // Shares of synchronous compaction wall time the calibration aims for.
  double target_write_share = 0;
  double target_fsync_share = 0;
  nlohmann::json calibration;  // measurements the latencies were derived from
};

struct AbOptions {
  std::string profile = "nvme-sim";
  uint64_t volume_bytes = 2ull << 30;
  uint32_t value_size = 1024;
  uint32_t threads = 4;
  uint64_t seed = 42;
  // Random reads issued after each fill to compare the found-key sets.
  uint64_t verify_reads = 100000;
  // Fraction of the volume each calibration pass writes.
  double calibration_fraction = 0.25;
  uint32_t calibration_passes = 2;
  Settings base;  // geometry and any user overrides
  std::string work_dir;
  bool verbose = false;
};

struct AbResult {
  DeviceProfile profile;
  RunReport sync;
  RunReport async;
  RunReport sync_reads;
  RunReport async_reads;
  double throughput_ratio = 0;  // async / sync
  double stall_ratio = 0;       // async / sync; 0 when sync never stalled
  double p99_ratio = 0;         // async / sync
  double sync_fsync_pct = 0;    // share of sync compaction wall time in fsync
  double async_fallback_pct = 0;
  bool found_sets_match = false;

  nlohmann::json ToJson() const;
};

// Desk-scale geometry: 8 MiB memtable and SST files, 32 MiB level 1.
Settings DeskGeometry();

// Measures synchronous compactions on an unthrottled device and derives
// per-MiB write and per-fsync latencies that give the profile's shares.
DeviceProfile Calibrate(const AbOptions& opts);

// Runs the same seeded fillrandom under synchronous compaction I/O and under
// the asynchronous pipeline with the same device latencies.
AbResult RunAb(const AbOptions& opts, const DeviceProfile& profile);

}  // namespace bench
