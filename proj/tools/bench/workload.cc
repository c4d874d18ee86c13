#include "workload.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace bench {

namespace {

constexpr double kZipfianTheta = 0.99;
constexpr size_t kValueSourceBytes = 1 << 20;

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

uint64_t FnvMix(uint64_t h, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

uint64_t Fnv64(uint64_t v) { return FnvMix(kFnvOffset, v); }

struct KindInfo {
  WorkloadKind kind;
  const char* name;
};

constexpr KindInfo kKinds[] = {
    {WorkloadKind::kFillRandom, "fillrandom"}, {WorkloadKind::kOverwrite, "overwrite"},
    {WorkloadKind::kReadSeq, "readseq"},       {WorkloadKind::kReadRandom, "readrandom"},
    {WorkloadKind::kYcsbA, "ycsb_a"},          {WorkloadKind::kYcsbB, "ycsb_b"},
    {WorkloadKind::kYcsbC, "ycsb_c"},          {WorkloadKind::kYcsbD, "ycsb_d"},
    {WorkloadKind::kYcsbE, "ycsb_e"},          {WorkloadKind::kYcsbF, "ycsb_f"},
    {WorkloadKind::kLoad, "load"},
};

bool IsYcsb(WorkloadKind k) {
  return k >= WorkloadKind::kYcsbA && k <= WorkloadKind::kYcsbF;
}

double Seconds(std::chrono::steady_clock::duration d) {
  return std::chrono::duration<double>(d).count();
}

}  // namespace

std::optional<WorkloadKind> ParseWorkload(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '-', '_');
  if (norm.size() == 5 && norm.rfind("ycsb", 0) == 0) norm.insert(4, "_");  // ycsba
  for (const auto& k : kKinds) {
    if (norm == k.name) return k.kind;
  }
  return std::nullopt;
}

const char* WorkloadName(WorkloadKind k) {
  for (const auto& info : kKinds) {
    if (info.kind == k) return info.name;
  }
  return "?";
}

std::optional<KeyDistribution> ParseDistribution(std::string_view s) {
  if (s == "uniform") return KeyDistribution::kUniform;
  if (s == "zipfian" || s == "zipf") return KeyDistribution::kZipfian;
  if (s == "latest") return KeyDistribution::kLatest;
  return std::nullopt;
}

const char* DistributionName(KeyDistribution d) {
  switch (d) {
    case KeyDistribution::kUniform:
      return "uniform";
    case KeyDistribution::kZipfian:
      return "zipfian";
    case KeyDistribution::kLatest:
      return "latest";
  }
  return "?";
}

KeyDistribution WorkloadSpec::EffectiveDistribution() const {
  if (distribution) return *distribution;
  if (kind == WorkloadKind::kYcsbD) return KeyDistribution::kLatest;
  return IsYcsb(kind) ? KeyDistribution::kZipfian : KeyDistribution::kUniform;
}

ZipfianGenerator::ZipfianGenerator(uint64_t n, double theta)
    : n_(0), theta_(theta), alpha_(1.0 / (1.0 - theta)), zeta2_(0), zetan_(0), eta_(0) {
  zeta2_ = 1.0 + std::pow(0.5, theta_);
  Grow(std::max<uint64_t>(n, 1));
}

void ZipfianGenerator::Grow(uint64_t n) {
  for (uint64_t i = n_ + 1; i <= n; ++i) zetan_ += 1.0 / std::pow(static_cast<double>(i), theta_);
  if (n > n_) {
    n_ = n;
    Recompute();
  }
}

void ZipfianGenerator::Recompute() {
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n_), 1.0 - theta_)) / (1.0 - zeta2_ / zetan_);
}

uint64_t ZipfianGenerator::Next(std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return std::min<uint64_t>(1, n_ - 1);
  const auto v = static_cast<uint64_t>(static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(v, n_ - 1);
}

std::string KeyName(uint64_t id, uint32_t key_size) {
  char buf[32];
  const int width = static_cast<int>(std::min<uint32_t>(key_size, 20));
  std::snprintf(buf, sizeof(buf), "%0*llu", width, static_cast<unsigned long long>(id));
  std::string key(buf);
  if (key.size() < key_size) key.insert(0, key_size - key.size(), 'k');
  return key;
}

RequestGenerator::RequestGenerator(const WorkloadSpec& spec, uint32_t thread,
                                   const ZipfianGenerator* zipf_base)
    : spec_(spec), thread_(thread), dist_(spec.EffectiveDistribution()) {
  std::seed_seq seq{spec.seed, static_cast<uint64_t>(thread), static_cast<uint64_t>(spec.kind)};
  rng_.seed(seq);
  if (zipf_base != nullptr) zipf_ = *zipf_base;
  values_.resize(kValueSourceBytes + spec.value_size);
  for (size_t i = 0; i < values_.size(); i += 8) {
    const uint64_t r = rng_();
    for (size_t b = 0; b < 8 && i + b < values_.size(); ++b) values_[i + b] = static_cast<char>(' ' + (r >> (8 * b)) % 95);
  }
  count_ = spec.num_ops / spec.threads + (thread < spec.num_ops % spec.threads ? 1 : 0);
  if (spec.kind == WorkloadKind::kLoad) {
    // Multiplying by a stride coprime to the key space permutes it.
    const uint64_t n = spec.KeySpace();
    load_stride_ = 2654435761ull % n;
    if (load_stride_ == 0) load_stride_ = 1;
    while (std::gcd(load_stride_, n) != 1) ++load_stride_;
  }
}

uint64_t RequestGenerator::ChooseKey() {
  const uint64_t n = spec_.KeySpace();
  switch (dist_) {
    case KeyDistribution::kUniform:
      return std::uniform_int_distribution<uint64_t>(0, n - 1)(rng_);
    case KeyDistribution::kZipfian:
      // Scrambled so hot keys spread over the key space.
      return Fnv64(zipf_->Next(rng_)) % n;
    case KeyDistribution::kLatest: {
      // Newest keys are hottest; inserts of all threads are assumed to
      // progress at this thread's rate.
      const uint64_t newest = n + inserted_ * spec_.threads;
      zipf_->Grow(newest);
      return newest - 1 - zipf_->Next(rng_);
    }
  }
  return 0;
}

Request RequestGenerator::Next() {
  Request r{OpType::kPut, 0, 0, 0};
  const uint64_t i = issued_++;
  const double coin = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  auto insert = [&] {
    r.op = OpType::kInsert;
    r.key_id = spec_.KeySpace() + thread_ + static_cast<uint64_t>(spec_.threads) * inserted_++;
  };
  switch (spec_.kind) {
    case WorkloadKind::kFillRandom:
    case WorkloadKind::kOverwrite:
      r.op = OpType::kPut;
      r.key_id = ChooseKey();
      break;
    case WorkloadKind::kLoad: {
      const uint64_t n = spec_.KeySpace();
      const uint64_t slot = thread_ + static_cast<uint64_t>(spec_.threads) * i;
      r.op = OpType::kPut;
      r.key_id = static_cast<uint64_t>((static_cast<unsigned __int128>(slot % n) * load_stride_) % n);
      break;
    }
    case WorkloadKind::kReadSeq:
      r.op = OpType::kSeqRead;
      break;
    case WorkloadKind::kReadRandom:
    case WorkloadKind::kYcsbC:
      r.op = OpType::kGet;
      r.key_id = ChooseKey();
      break;
    case WorkloadKind::kYcsbA:
      r.op = coin < 0.5 ? OpType::kGet : OpType::kPut;
      r.key_id = ChooseKey();
      break;
    case WorkloadKind::kYcsbB:
      r.op = coin < 0.95 ? OpType::kGet : OpType::kPut;
      r.key_id = ChooseKey();
      break;
    case WorkloadKind::kYcsbD:
      if (coin < 0.95) {
        r.op = OpType::kGet;
        r.key_id = ChooseKey();
      } else {
        insert();
      }
      break;
    case WorkloadKind::kYcsbE:
      if (coin < 0.95) {
        r.op = OpType::kScan;
        r.key_id = ChooseKey();
        r.scan_length = std::uniform_int_distribution<uint32_t>(1, spec_.max_scan_length)(rng_);
      } else {
        insert();
      }
      break;
    case WorkloadKind::kYcsbF:
      r.op = coin < 0.5 ? OpType::kGet : OpType::kReadModifyWrite;
      r.key_id = ChooseKey();
      break;
  }
  if (r.op == OpType::kPut || r.op == OpType::kInsert || r.op == OpType::kReadModifyWrite) {
    r.value_offset = static_cast<uint32_t>(rng_() % kValueSourceBytes);
  }
  return r;
}

namespace {

std::optional<ZipfianGenerator> MakeZipfBase(const WorkloadSpec& spec) {
  if (spec.EffectiveDistribution() == KeyDistribution::kUniform) return std::nullopt;
  return ZipfianGenerator(spec.KeySpace(), kZipfianTheta);
}

uint64_t DigestRequest(uint64_t h, const Request& r) {
  h = FnvMix(h, static_cast<uint64_t>(r.op));
  h = FnvMix(h, r.key_id);
  h = FnvMix(h, r.value_offset);
  return FnvMix(h, r.scan_length);
}

std::string Hex(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

uint64_t RequestStreamDigest(const WorkloadSpec& spec) {
  const auto zipf = MakeZipfBase(spec);
  uint64_t digest = kFnvOffset;
  for (uint32_t t = 0; t < spec.threads; ++t) {
    RequestGenerator gen(spec, t, zipf ? &*zipf : nullptr);
    uint64_t h = kFnvOffset;
    for (uint64_t i = 0; i < gen.count(); ++i) h = DigestRequest(h, gen.Next());
    digest = FnvMix(digest, h);
  }
  return digest;
}

LatencySummary Summarize(std::vector<uint64_t> samples_ns) {
  LatencySummary s;
  if (samples_ns.empty()) return s;
  std::sort(samples_ns.begin(), samples_ns.end());
  auto at = [&](double q) {
    // Nearest-rank percentile.
    const auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(samples_ns.size())));
    const size_t idx = std::min(samples_ns.size(), std::max<size_t>(rank, 1)) - 1;
    return static_cast<double>(samples_ns[idx]) / 1000.0;
  };
  s.p50_us = at(0.50);
  s.p99_us = at(0.99);
  s.p999_us = at(0.999);
  s.max_us = static_cast<double>(samples_ns.back()) / 1000.0;
  long double sum = 0;
  for (uint64_t v : samples_ns) sum += v;
  s.mean_us = static_cast<double>(sum / samples_ns.size()) / 1000.0;
  return s;
}

nlohmann::json RunReport::ToJson() const {
  nlohmann::json j;
  j["workload"] = workload;
  j["distribution"] = distribution;
  j["ops"] = ops;
  j["threads"] = threads;
  j["value_size"] = value_size;
  j["total_time_s"] = total_time_s;
  j["throughput_ops_s"] = throughput_ops;
  j["throughput_mib_s"] = throughput_mib_s;
  j["stall_time_s"] = stall_time_s;
  j["latency_us"] = {{"p50", latency.p50_us},
                     {"p99", latency.p99_us},
                     {"p999", latency.p999_us},
                     {"max", latency.max_us},
                     {"mean", latency.mean_us}};
  j["found"] = found;
  j["not_found"] = not_found;
  j["scanned_records"] = scanned;
  j["write_amplification"] = write_amplification;
  j["compactions"] = compactions;
  j["fallback_waits"] = fallback_waits;
  j["compactions_with_fallback"] = compactions_with_fallback;
  j["pipelined_merges"] = pipelined_merges;
  j["compaction_phases"] = phases;
  j["request_digest"] = request_digest;
  j["found_set_digest"] = found_set_digest;
  return j;
}

std::string RunReport::ToTable() const {
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "%-12s %10llu ops %3u thr %8.2f s %11.0f ops/s %8.2f MiB/s  stall %7.2f s  "
                "p99 %9.1f us  found %llu/%llu  WA %.2f  compactions %llu",
                workload.c_str(), static_cast<unsigned long long>(ops), threads, total_time_s,
                throughput_ops, throughput_mib_s, stall_time_s, latency.p99_us,
                static_cast<unsigned long long>(found),
                static_cast<unsigned long long>(found + not_found), write_amplification,
                static_cast<unsigned long long>(compactions));
  return buf;
}

namespace {

struct ThreadResult {
  std::vector<uint64_t> latencies;
  uint64_t found = 0;
  uint64_t not_found = 0;
  uint64_t scanned = 0;
  uint64_t bytes = 0;
  uint64_t digest = kFnvOffset;
  uint64_t found_set = 0;
  std::string error;
};

void RunThread(Engine& engine, const WorkloadSpec& spec, uint32_t thread,
               const ZipfianGenerator* zipf, ThreadResult* out) {
  RequestGenerator gen(spec, thread, zipf);
  const std::string& values = gen.value_source();
  out->latencies.reserve(gen.count());
  std::string scratch;
  std::unique_ptr<Cursor> seq;
  try {
    for (uint64_t i = 0; i < gen.count(); ++i) {
      const Request r = gen.Next();
      out->digest = DigestRequest(out->digest, r);
      const std::string key = KeyName(r.key_id, spec.key_size);
      const std::string_view value(values.data() + r.value_offset, spec.value_size);
      const auto start = std::chrono::steady_clock::now();
      switch (r.op) {
        case OpType::kPut:
        case OpType::kInsert:
          engine.Put(key, value);
          out->bytes += key.size() + value.size();
          break;
        case OpType::kGet:
          if (engine.Get(key, &scratch)) {
            ++out->found;
            out->found_set += Fnv64(r.key_id);
            out->bytes += key.size() + scratch.size();
          } else {
            ++out->not_found;
          }
          break;
        case OpType::kReadModifyWrite:
          if (engine.Get(key, &scratch)) {
            ++out->found;
          } else {
            ++out->not_found;
          }
          engine.Put(key, value);
          out->bytes += key.size() + value.size();
          break;
        case OpType::kScan: {
          Cursor c(engine);
          c.Seek(key);
          for (uint32_t n = 0; n < r.scan_length && c.Valid(); ++n, c.Next()) {
            ++out->scanned;
            out->bytes += c.key().size() + c.value().size();
          }
          c.CheckStatus();
          break;
        }
        case OpType::kSeqRead:
          if (!seq) {
            seq = std::make_unique<Cursor>(engine);
            seq->SeekToFirst();
          } else {
            seq->Next();
          }
          if (!seq->Valid()) seq->SeekToFirst();
          if (seq->Valid()) {
            ++out->found;
            out->bytes += seq->key().size() + seq->value().size();
          } else {
            ++out->not_found;
          }
          break;
      }
      out->latencies.push_back(static_cast<uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start)
              .count()));
    }
  } catch (const std::exception& e) {
    out->error = e.what();
  }
}

}  // namespace

RunReport RunWorkload(Engine& engine, const WorkloadSpec& spec) {
  if (spec.threads == 0) throw std::invalid_argument("threads must be positive");
  if (spec.KeySpace() == 0) throw std::invalid_argument("key space is empty");
  const auto zipf = MakeZipfBase(spec);
  const nlohmann::json before = engine.Metrics();

  std::vector<ThreadResult> results(spec.threads);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  for (uint32_t t = 0; t < spec.threads; ++t) {
    threads.emplace_back(RunThread, std::ref(engine), std::cref(spec), t, zipf ? &*zipf : nullptr,
                         &results[t]);
  }
  for (auto& th : threads) th.join();
  const double elapsed = Seconds(std::chrono::steady_clock::now() - start);
  for (const auto& r : results) {
    if (!r.error.empty()) throw std::runtime_error(std::string(WorkloadName(spec.kind)) + ": " + r.error);
  }
  const nlohmann::json after = engine.Metrics();

  RunReport rep;
  rep.workload = WorkloadName(spec.kind);
  rep.distribution = DistributionName(spec.EffectiveDistribution());
  rep.threads = spec.threads;
  rep.value_size = spec.value_size;
  rep.total_time_s = elapsed;
  std::vector<uint64_t> all;
  uint64_t bytes = 0;
  uint64_t digest = kFnvOffset;
  uint64_t found_set = 0;
  for (auto& r : results) {
    found_set += r.found_set;
    rep.ops += r.latencies.size();
    rep.found += r.found;
    rep.not_found += r.not_found;
    rep.scanned += r.scanned;
    bytes += r.bytes;
    digest = FnvMix(digest, r.digest);
    all.insert(all.end(), r.latencies.begin(), r.latencies.end());
  }
  rep.latency = Summarize(std::move(all));
  rep.throughput_ops = elapsed > 0 ? static_cast<double>(rep.ops) / elapsed : 0;
  rep.throughput_mib_s = elapsed > 0 ? static_cast<double>(bytes) / (1 << 20) / elapsed : 0;
  auto delta = [&](const char* key) {
    return after[key].get<double>() - before[key].get<double>();
  };
  rep.stall_time_s = delta("stall_seconds");
  rep.compactions = static_cast<uint64_t>(delta("compactions_count"));
  rep.fallback_waits = static_cast<uint64_t>(delta("fallback_fsync_waits"));
  rep.compactions_with_fallback = static_cast<uint64_t>(delta("compactions_with_fallback"));
  rep.pipelined_merges = static_cast<uint64_t>(delta("pipelined_merges"));
  rep.write_amplification = after["write_amplification"].get<double>();
  const auto& pb = after["phase_breakdown"];
  const auto& pa = before["phase_breakdown"];
  const double compute = pb["compute_seconds"].get<double>() - pa["compute_seconds"].get<double>();
  const double write = pb["write_seconds"].get<double>() - pa["write_seconds"].get<double>();
  const double fsync = pb["fsync_seconds"].get<double>() - pa["fsync_seconds"].get<double>();
  const double total = compute + write + fsync;
  auto pct = [&](double v) { return total > 0 ? 100.0 * v / total : 0.0; };
  rep.phases = {{"compute_seconds", compute}, {"write_seconds", write}, {"fsync_seconds", fsync},
                {"compute_pct", pct(compute)}, {"write_pct", pct(write)}, {"fsync_pct", pct(fsync)}};
  rep.request_digest = Hex(digest);
  rep.found_set_digest = Hex(found_set);
  return rep;
}

}  // namespace bench
