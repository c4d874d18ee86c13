#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine.h"

namespace bench {

enum class WorkloadKind {
  kFillRandom,
  kOverwrite,
  kReadSeq,
  kReadRandom,
  kYcsbA,
  kYcsbB,
  kYcsbC,
  kYcsbD,
  kYcsbE,
  kYcsbF,
  kLoad,
};

enum class KeyDistribution { kUniform, kZipfian, kLatest };

std::optional<WorkloadKind> ParseWorkload(std::string_view s);
const char* WorkloadName(WorkloadKind k);
std::optional<KeyDistribution> ParseDistribution(std::string_view s);
const char* DistributionName(KeyDistribution d);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kFillRandom;
  uint64_t num_ops = 100000;
  // Size of the key space; 0 means num_ops.
  uint64_t num_keys = 0;
  uint32_t threads = 1;
  uint32_t key_size = 16;
  uint32_t value_size = 1024;
  // Unset: uniform for the fill/read kinds, zipfian for YCSB (latest for D).
  std::optional<KeyDistribution> distribution;
  uint64_t seed = 42;
  uint32_t max_scan_length = 100;

  uint64_t KeySpace() const { return num_keys != 0 ? num_keys : num_ops; }
  KeyDistribution EffectiveDistribution() const;
};

enum class OpType : uint8_t { kPut, kGet, kScan, kReadModifyWrite, kInsert, kSeqRead };

struct Request {
  OpType op;
  uint64_t key_id;
  uint32_t value_offset;  // into the thread's value source
  uint32_t scan_length;
};

// YCSB-style zipfian over [0, n) with incremental growth of n.
class ZipfianGenerator {
 public:
  ZipfianGenerator(uint64_t n, double theta);
  uint64_t Next(std::mt19937_64& rng);
  void Grow(uint64_t n);
  uint64_t items() const { return n_; }

 private:
  void Recompute();
  uint64_t n_;
  double theta_;
  double alpha_;
  double zeta2_;
  double zetan_;
  double eta_;
};

// Deterministic per-thread request stream.
class RequestGenerator {
 public:
  RequestGenerator(const WorkloadSpec& spec, uint32_t thread, const ZipfianGenerator* zipf_base);
  // Operations this thread issues.
  uint64_t count() const { return count_; }
  Request Next();
  const std::string& value_source() const { return values_; }

 private:
  uint64_t ChooseKey();

  const WorkloadSpec spec_;
  const uint32_t thread_;
  const KeyDistribution dist_;
  std::mt19937_64 rng_;
  std::optional<ZipfianGenerator> zipf_;
  std::string values_;
  uint64_t count_ = 0;
  uint64_t issued_ = 0;
  uint64_t inserted_ = 0;
  uint64_t load_stride_ = 1;
};

std::string KeyName(uint64_t id, uint32_t key_size);

// FNV-1a digest of every request of every thread, in thread order.
uint64_t RequestStreamDigest(const WorkloadSpec& spec);

struct LatencySummary {
  double p50_us = 0;
  double p99_us = 0;
  double p999_us = 0;
  double max_us = 0;
  double mean_us = 0;
};

LatencySummary Summarize(std::vector<uint64_t> samples_ns);

struct RunReport {
  std::string workload;
  std::string distribution;
  uint64_t ops = 0;
  uint32_t threads = 0;
  uint32_t value_size = 0;
  double total_time_s = 0;
  double throughput_ops = 0;
  double throughput_mib_s = 0;
  double stall_time_s = 0;
  LatencySummary latency;
  uint64_t found = 0;
  uint64_t not_found = 0;
  uint64_t scanned = 0;
  double write_amplification = 0;
  uint64_t compactions = 0;
  uint64_t fallback_waits = 0;
  uint64_t compactions_with_fallback = 0;
  uint64_t pipelined_merges = 0;
  nlohmann::json phases;  // compaction phase seconds and shares for this run
  std::string request_digest;
  // Order-independent digest of the ids of keys that reads found.
  std::string found_set_digest;

  nlohmann::json ToJson() const;
  std::string ToTable() const;
};

// Drives `engine` with the spec's request mix on spec.threads threads.
RunReport RunWorkload(Engine& engine, const WorkloadSpec& spec);

}  // namespace bench
