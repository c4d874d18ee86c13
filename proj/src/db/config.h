#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "util/status.h"

namespace alsm {

inline constexpr int kNumLevels = 7;

enum class IoBackend { kSync, kAsync, kSimulated };

std::string_view IoBackendName(IoBackend b);
std::optional<IoBackend> ParseIoBackend(std::string_view s);

struct EngineConfig {
  uint64_t memtable_limit = 64ull << 20;
  uint64_t sst_target_size = 64ull << 20;
  uint64_t merge_buffer_size = 1ull << 20;
  uint64_t base_level_size = 256ull << 20;  // capacity of level 1
  uint32_t l0_compaction_trigger = 4;
  uint32_t level_size_ratio = 10;
  uint32_t compaction_threads = 1;
  uint64_t max_value_size = 64ull << 20;

  IoBackend io_backend = IoBackend::kAsync;
  // Latency injected per MiB written and per fsync request, for any backend.
  uint64_t sim_write_latency_us_per_mib = 0;
  uint64_t sim_fsync_latency_us = 0;
  bool direct_io_poll = false;
  // When false, fsync only updates durability bookkeeping (latency still applies).
  bool real_fsync = true;
  uint32_t io_queue_depth = 4096;
  uint32_t io_async_threads = 2;

  bool wal_fsync_each_write = false;

  // Writers stall while this many immutable memtables wait for flush.
  uint32_t max_immutables = 1;
  // Writers stall when level 0 holds more than this many files. 0 = 2 x trigger.
  uint32_t l0_stall_files = 0;
  // Writers stall when bytes above capacity, summed over levels >= 1, exceed this.
  // 0 disables the channel.
  uint64_t pending_compaction_bytes_stall = 0;

  std::chrono::milliseconds ledger_sweep_max_age{30'000};
  std::chrono::milliseconds ledger_sweep_interval{1'000};
  // How many times a failed batch fsync is retried before files are rebuilt.
  uint32_t fsync_retry_limit = 2;

  uint32_t EffectiveL0StallFiles() const {
    return l0_stall_files != 0 ? l0_stall_files : 2 * l0_compaction_trigger;
  }

  Status Validate() const;

  // Applies one `key=value` setting. Sizes accept K/M/G suffixes (binary).
  Status Set(std::string_view key, std::string_view value);

  // Parses a config file of `key = value` lines; '#' starts a comment.
  Status ParseText(std::string_view text);
  Status LoadFile(const std::string& path);

  std::string ToText() const;
};

// Byte capacity of level n (n >= 1): base_level_size * ratio^(n-1).
// Level 0 is triggered by file count and has no byte capacity.
std::optional<uint64_t> LevelCapacity(const EngineConfig& config, int level);

}  // namespace alsm
