#include "ab.h"

#include <cmath>
#include <cstdio>

namespace bench {

namespace {

struct ProfileShares {
  const char* name;
  double write;
  double fsync;
};

// Shares of synchronous compaction wall time spent writing and syncing.
constexpr ProfileShares kProfiles[] = {
    {"nvme-sim", 0.063, 0.460},
    {"ssd-sim", 0.100, 0.500},
    {"hdd-sim", 0.150, 0.550},
};

const ProfileShares& FindProfile(const std::string& name) {
  for (const auto& p : kProfiles) {
    if (name == p.name) return p;
  }
  throw std::invalid_argument("unknown profile '" + name + "' (nvme-sim, ssd-sim, hdd-sim)");
}

Settings ModeSettings(const AbOptions& opts, const DeviceProfile& profile, bool async) {
  Settings s = DeskGeometry();
  s.Set("io.real_fsync", "false");
  for (const auto& [k, v] : opts.base.values()) s.Set(k, v);
  s.Set("io.backend", async ? "sim" : "sync");
  s.Set("io.sim_write_latency_us_per_mib", std::to_string(profile.write_us_per_mib));
  s.Set("io.sim_fsync_latency_us", std::to_string(profile.fsync_us));
  return s;
}

WorkloadSpec FillSpec(const AbOptions& opts, uint64_t volume) {
  WorkloadSpec w;
  w.kind = WorkloadKind::kFillRandom;
  w.value_size = opts.value_size;
  w.num_ops = std::max<uint64_t>(1, volume / (opts.value_size + w.key_size));
  w.threads = opts.threads;
  w.seed = opts.seed;
  return w;
}

struct SyncMeasurement {
  double compute_s = 0;
  double write_s = 0;
  double fsync_s = 0;
  double mib_written = 0;
  double fsyncs = 0;
  uint64_t compactions = 0;
};

SyncMeasurement MeasureSync(const AbOptions& opts, const DeviceProfile& profile, uint64_t volume) {
  ScratchDir dir(opts.work_dir);
  Engine engine(ModeSettings(opts, profile, false), dir.path());
  const nlohmann::json before = engine.Metrics();
  RunWorkload(engine, FillSpec(opts, volume));
  engine.WaitIdle();
  const nlohmann::json after = engine.Metrics();
  engine.Close();
  auto d = [&](const char* key) { return after[key].get<double>() - before[key].get<double>(); };
  auto dp = [&](const char* key) {
    return after["phase_breakdown"][key].get<double>() - before["phase_breakdown"][key].get<double>();
  };
  SyncMeasurement m;
  m.compute_s = dp("compute_seconds");
  m.write_s = dp("write_seconds");
  m.fsync_s = dp("fsync_seconds");
  m.mib_written = d("compaction_bytes_written") / (1 << 20);
  m.compactions = static_cast<uint64_t>(d("compactions_count"));
  // One fsync per output file plus the MANIFEST sync of each commit.
  m.fsyncs = d("compaction_output_files") + d("compactions_count");
  return m;
}

}  // namespace

Settings DeskGeometry() {
  Settings s;
  s.Set("memtable_limit", "8M");
  s.Set("sst_target_size", "8M");
  s.Set("base_level_size", "32M");
  s.Set("merge_buffer_size", "1M");
  return s;
}

DeviceProfile Calibrate(const AbOptions& opts) {
  const ProfileShares& shares = FindProfile(opts.profile);
  DeviceProfile p;
  p.name = shares.name;
  p.target_write_share = shares.write;
  p.target_fsync_share = shares.fsync;
  const double compute_share = 1.0 - shares.write - shares.fsync;
  const auto volume = static_cast<uint64_t>(static_cast<double>(opts.volume_bytes) * opts.calibration_fraction);

  p.calibration = nlohmann::json::array();
  for (uint32_t pass = 0; pass < std::max<uint32_t>(1, opts.calibration_passes); ++pass) {
    const SyncMeasurement m = MeasureSync(opts, p, volume);
    if (m.compactions == 0 || m.fsyncs == 0 || m.mib_written <= 0) {
      throw std::runtime_error("calibration volume produced no compactions; raise --volume");
    }
    const double total = m.compute_s + m.write_s + m.fsync_s;
    p.calibration.push_back({{"pass", pass},
                             {"write_us_per_mib", p.write_us_per_mib},
                             {"fsync_us", p.fsync_us},
                             {"compactions", m.compactions},
                             {"compute_s", m.compute_s},
                             {"write_s", m.write_s},
                             {"fsync_s", m.fsync_s},
                             {"fsync_pct", total > 0 ? 100.0 * m.fsync_s / total : 0}});
    // Latencies that make write and fsync time the target multiples of the
    // compute time just measured. The non-latency part of write time (the
    // actual copy into the file) counts toward the write share.
    const double raw_write_s =
        std::max(0.0, m.write_s - m.mib_written * static_cast<double>(p.write_us_per_mib) / 1e6);
    const double want_write_s = m.compute_s * shares.write / compute_share;
    const double want_fsync_s = m.compute_s * shares.fsync / compute_share;
    p.write_us_per_mib = static_cast<uint64_t>(
        std::llround(std::max(0.0, want_write_s - raw_write_s) / m.mib_written * 1e6));
    p.fsync_us = static_cast<uint64_t>(std::llround(want_fsync_s / m.fsyncs * 1e6));
    if (opts.verbose) {
      std::fprintf(stderr, "calibration pass %u: %llu compactions, compute %.2fs write %.2fs fsync %.2fs -> "
                   "write %llu us/MiB, fsync %llu us\n",
                   pass, static_cast<unsigned long long>(m.compactions), m.compute_s, m.write_s, m.fsync_s,
                   static_cast<unsigned long long>(p.write_us_per_mib),
                   static_cast<unsigned long long>(p.fsync_us));
    }
  }
  return p;
}

nlohmann::json AbResult::ToJson() const {
  nlohmann::json j;
  j["profile"] = {{"name", profile.name},
                  {"write_us_per_mib", profile.write_us_per_mib},
                  {"fsync_us", profile.fsync_us},
                  {"target_write_share", profile.target_write_share},
                  {"target_fsync_share", profile.target_fsync_share},
                  {"calibration", profile.calibration}};
  j["sync"] = sync.ToJson();
  j["async"] = async.ToJson();
  j["sync_reads"] = sync_reads.ToJson();
  j["async_reads"] = async_reads.ToJson();
  j["throughput_ratio"] = throughput_ratio;
  j["stall_ratio"] = stall_ratio;
  j["p99_ratio"] = p99_ratio;
  j["sync_fsync_pct"] = sync_fsync_pct;
  j["async_fallback_pct"] = async_fallback_pct;
  j["found_sets_match"] = found_sets_match;
  return j;
}

AbResult RunAb(const AbOptions& opts, const DeviceProfile& profile) {
  AbResult r;
  r.profile = profile;
  const WorkloadSpec fill = FillSpec(opts, opts.volume_bytes);
  WorkloadSpec reads;
  reads.kind = WorkloadKind::kReadRandom;
  reads.num_ops = opts.verify_reads;
  reads.num_keys = fill.num_ops;
  reads.threads = opts.threads;
  reads.seed = opts.seed + 1;
  reads.value_size = opts.value_size;

  for (bool async : {false, true}) {
    ScratchDir dir(opts.work_dir);
    Engine engine(ModeSettings(opts, profile, async), dir.path());
    RunReport fill_report = RunWorkload(engine, fill);
    if (opts.verbose) std::fprintf(stderr, "%s %s\n", async ? "async" : "sync ", fill_report.ToTable().c_str());
    RunReport read_report;
    if (reads.num_ops > 0) read_report = RunWorkload(engine, reads);
    engine.Close();
    (async ? r.async : r.sync) = std::move(fill_report);
    (async ? r.async_reads : r.sync_reads) = std::move(read_report);
  }

  r.throughput_ratio = r.sync.throughput_ops > 0 ? r.async.throughput_ops / r.sync.throughput_ops : 0;
  r.stall_ratio = r.sync.stall_time_s > 0 ? r.async.stall_time_s / r.sync.stall_time_s : 0;
  r.p99_ratio = r.sync.latency.p99_us > 0 ? r.async.latency.p99_us / r.sync.latency.p99_us : 0;
  r.sync_fsync_pct = r.sync.phases.value("fsync_pct", 0.0);
  r.async_fallback_pct = r.async.compactions > 0 ? 100.0 * static_cast<double>(r.async.compactions_with_fallback) /
                                                       static_cast<double>(r.async.compactions)
                                                 : 0;
  r.found_sets_match = r.sync_reads.found == r.async_reads.found &&
                       r.sync_reads.found_set_digest == r.async_reads.found_set_digest;
  return r;
}

}  // namespace bench
