// Workload driver, A/B comparison and crash harness for the engine.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ab.h"
#include "crash.h"
#include "engine.h"
#include "workload.h"

namespace {

using bench::Settings;

struct EngineArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string backend;
  bool desk = true;

  void Register(CLI::App* app) {
    app->add_option("--config", config_file, "key=value engine config file");
    app->add_option("--set", sets, "engine setting key=value (repeatable)");
    app->add_option("--backend", backend, "I/O backend: sync, async or sim");
    app->add_flag("!--no-desk", desk, "start from library defaults instead of the desk geometry");
  }

  Settings Build() const {
    Settings s = desk ? bench::DeskGeometry() : Settings();
    if (!config_file.empty()) s.LoadFile(config_file);
    for (const auto& kv : sets) s.SetAssignment(kv);
    if (!backend.empty()) s.Set("io.backend", backend);
    return s;
  }
};

void Emit(const nlohmann::json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << j.dump(2) << "\n";
}

std::vector<std::string> Split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alsm engine benchmark and crash harness"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "drive the engine with one or more workloads");
  EngineArgs run_engine;
  run_engine.Register(run);
  std::string workloads = "fillrandom";
  std::string db_dir;
  std::string out;
  std::string distribution;
  bench::WorkloadSpec spec;
  bool keep = false;
  run->add_option("--workload", workloads,
                  "comma-separated: fillrandom, overwrite, readseq, readrandom, ycsb_a..ycsb_f, load");
  run->add_option("--ops", spec.num_ops, "operations per workload");
  run->add_option("--num", spec.num_keys, "key space (default: --ops)");
  run->add_option("--value-size", spec.value_size);
  run->add_option("--key-size", spec.key_size)->check(CLI::Range(8, 64));
  run->add_option("--threads", spec.threads)->check(CLI::PositiveNumber);
  run->add_option("--distribution", distribution, "uniform, zipfian or latest");
  run->add_option("--seed", spec.seed);
  run->add_option("--db", db_dir, "database directory (default: fresh scratch directory)");
  run->add_flag("--keep", keep, "keep the scratch database");
  run->add_option("--out", out, "JSON report path (default stdout)");

  // ab
  auto* ab = app.add_subcommand("ab", "compare synchronous and asynchronous compaction I/O");
  EngineArgs ab_engine;
  ab_engine.Register(ab);
  bench::AbOptions ab_opts;
  std::string ab_volume = "2G";
  std::string ab_out;
  uint64_t fixed_write_us = 0;
  int64_t fixed_fsync_us = -1;
  ab->add_option("--profile", ab_opts.profile, "nvme-sim, ssd-sim or hdd-sim");
  ab->add_option("--volume", ab_volume, "bytes written by each fill (K/M/G suffix)");
  ab->add_option("--value-size", ab_opts.value_size);
  ab->add_option("--threads", ab_opts.threads)->check(CLI::PositiveNumber);
  ab->add_option("--seed", ab_opts.seed);
  ab->add_option("--verify-reads", ab_opts.verify_reads, "random reads compared across modes");
  ab->add_option("--calibration-fraction", ab_opts.calibration_fraction)->check(CLI::Range(0.01, 1.0));
  ab->add_option("--calibration-passes", ab_opts.calibration_passes);
  ab->add_option("--write-us-per-mib", fixed_write_us, "skip calibration: write latency");
  ab->add_option("--fsync-us", fixed_fsync_us, "skip calibration: fsync latency");
  ab->add_option("--work-dir", ab_opts.work_dir);
  ab->add_option("--out", ab_out);
  ab->add_flag("-v,--verbose", ab_opts.verbose, "print calibration passes and per-mode tables");

  // crash
  auto* crash = app.add_subcommand("crash", "crash-injection matrix with recovery verification");
  EngineArgs crash_engine;
  crash_engine.desk = false;
  std::string points = "all";
  std::string modes = "sync,async";
  uint32_t reps = 5;
  uint64_t crash_seed = 1;
  bool unsynced_wal = false;
  bench::CrashOptions crash_opts;
  std::string crash_out;
  crash->add_option("--config", crash_engine.config_file);
  crash->add_option("--set", crash_engine.sets);
  crash->add_option("--points", points, "'all' or comma-separated point names");
  crash->add_option("--modes", modes, "comma-separated: sync, async");
  crash->add_option("--reps", reps, "seeded repetitions per point and mode");
  crash->add_option("--seed", crash_seed);
  crash->add_option("--ops", crash_opts.ops);
  crash->add_option("--keys", crash_opts.key_space);
  crash->add_flag("--unsynced-wal", unsynced_wal, "leave WAL appends unsynced (only the tail may be lost)");
  crash->add_option("--work-dir", crash_opts.work_dir);
  crash->add_option("--out", crash_out);
  auto* list = app.add_subcommand("points", "list crash points");

  // ledger maintenance
  auto* sweep = app.add_subcommand("ledger-sweep", "retire ledger entries older than --max-age-ms");
  EngineArgs sweep_engine;
  sweep_engine.Register(sweep);
  std::string sweep_db;
  uint64_t max_age_ms = 0;
  sweep->add_option("--db", sweep_db)->required();
  sweep->add_option("--max-age-ms", max_age_ms);
  auto* dump = app.add_subcommand("ledger-dump", "print ledger entries the MANIFEST leaves open");
  std::string dump_db;
  dump->add_option("--db", dump_db)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (!distribution.empty()) {
        spec.distribution = bench::ParseDistribution(distribution);
        if (!spec.distribution) throw std::invalid_argument("unknown distribution " + distribution);
      }
      std::unique_ptr<bench::ScratchDir> scratch;
      if (db_dir.empty()) {
        scratch = std::make_unique<bench::ScratchDir>();
        if (keep) scratch->Keep();
        db_dir = scratch->path();
      }
      bench::Engine engine(run_engine.Build(), db_dir);
      nlohmann::json reports = nlohmann::json::array();
      for (const auto& name : Split(workloads)) {
        auto kind = bench::ParseWorkload(name);
        if (!kind) throw std::invalid_argument("unknown workload " + name);
        bench::WorkloadSpec w = spec;
        w.kind = *kind;
        bench::RunReport r = bench::RunWorkload(engine, w);
        std::fprintf(stderr, "%s\n", r.ToTable().c_str());
        reports.push_back(r.ToJson());
      }
      engine.WaitIdle();
      nlohmann::json j;
      j["db"] = db_dir;
      j["runs"] = reports;
      j["engine"] = engine.Metrics();
      engine.Close();
      Emit(j, out);
    } else if (*ab) {
      ab_opts.base = ab_engine.Build();
      ab_opts.base.Set("io.real_fsync", ab_opts.base.Get("io.real_fsync", "false"));
      ab_opts.volume_bytes = bench::ParseSize(ab_volume);
      bench::DeviceProfile profile;
      if (fixed_fsync_us >= 0) {
        profile.name = ab_opts.profile + " (fixed)";
        profile.write_us_per_mib = fixed_write_us;
        profile.fsync_us = static_cast<uint64_t>(fixed_fsync_us);
      } else {
        profile = bench::Calibrate(ab_opts);
      }
      bench::AbResult r = bench::RunAb(ab_opts, profile);
      std::fprintf(stderr,
                   "throughput ratio %.3f  stall ratio %.3f  p99 ratio %.3f  sync fsync share %.1f%%  "
                   "async fallback %.1f%%  found sets %s\n",
                   r.throughput_ratio, r.stall_ratio, r.p99_ratio, r.sync_fsync_pct, r.async_fallback_pct,
                   r.found_sets_match ? "match" : "DIFFER");
      Emit(r.ToJson(), ab_out);
    } else if (*crash) {
      crash_opts.base = crash_engine.Build();
      const bool wal_sync = !unsynced_wal;
      nlohmann::json verdicts = nlohmann::json::array();
      size_t failed = 0;
      for (const auto& mode : Split(modes)) {
        const std::vector<std::string> pts = points == "all" ? bench::CrashPoints(wal_sync, mode) : Split(points);
        for (uint32_t rep = 0; rep < reps; ++rep) {
          for (const auto& p : pts) {
            bench::CrashCase c{p, crash_seed + rep, wal_sync, mode};
            bench::CrashVerdict v = bench::RunCrashCase(c, crash_opts);
            failed += v.pass ? 0 : 1;
            std::fprintf(stderr, "%-4s %-6s rep %u %-34s hit %-6llu acked %-6llu recovered %-6llu %s\n",
                         v.pass ? "PASS" : "FAIL", mode.c_str(), rep, p.c_str(),
                         static_cast<unsigned long long>(v.nth), static_cast<unsigned long long>(v.acked),
                         static_cast<unsigned long long>(v.recovered_seqno), v.detail.c_str());
            verdicts.push_back(v.ToJson());
          }
        }
      }
      Emit({{"cases", verdicts}, {"failed", failed}}, crash_out);
      return failed == 0 ? 0 : 1;
    } else if (*list) {
      for (const auto& p : bench::CrashPoints(true)) std::cout << p << "\n";
    } else if (*sweep) {
      bench::Engine engine(sweep_engine.Build(), sweep_db);
      const uint64_t retired = engine.LedgerSweep(max_age_ms);
      std::cout << "retired " << retired << " entries; " << engine.Property("alsm.ledger-open")
                << " still open\n";
      engine.Close();
    } else if (*dump) {
      // Offline: opening the engine would resolve every entry first.
      char* text = alsm_inspect_ledger(dump_db.c_str());
      if (text == nullptr) throw std::runtime_error(std::string("inspect: ") + alsm_last_error());
      std::cout << nlohmann::json::parse(text).dump(2) << "\n";
      alsm_free(text);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
