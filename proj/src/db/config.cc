#include "db/config.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace alsm {

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool ParseU64(std::string_view s, uint64_t* out) {
  s = Trim(s);
  if (s.empty()) return false;
  uint64_t mult = 1;
  switch (s.back()) {
    case 'k': case 'K': mult = 1ull << 10; s.remove_suffix(1); break;
    case 'm': case 'M': mult = 1ull << 20; s.remove_suffix(1); break;
    case 'g': case 'G': mult = 1ull << 30; s.remove_suffix(1); break;
    default: break;
  }
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  *out = v * mult;
  return true;
}

bool ParseBool(std::string_view s, bool* out) {
  s = Trim(s);
  if (s == "true" || s == "1" || s == "yes") {
    *out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    *out = false;
    return true;
  }
  return false;
}

}  // namespace

std::string_view IoBackendName(IoBackend b) {
  switch (b) {
    case IoBackend::kSync: return "sync";
    case IoBackend::kAsync: return "async";
    case IoBackend::kSimulated: return "sim";
  }
  return "?";
}

std::optional<IoBackend> ParseIoBackend(std::string_view s) {
  if (s == "sync") return IoBackend::kSync;
  if (s == "async") return IoBackend::kAsync;
  if (s == "sim") return IoBackend::kSimulated;
  return std::nullopt;
}

Status EngineConfig::Validate() const {
  if (memtable_limit == 0 || sst_target_size == 0 || merge_buffer_size == 0 ||
      base_level_size == 0) {
    return Status::InvalidArgument("sizes must be positive");
  }
  if (merge_buffer_size > sst_target_size) {
    return Status::InvalidArgument("merge_buffer_size exceeds sst_target_size");
  }
  if (l0_compaction_trigger == 0) return Status::InvalidArgument("l0_compaction_trigger is 0");
  if (level_size_ratio < 2) return Status::InvalidArgument("level_size_ratio < 2");
  if (compaction_threads == 0) return Status::InvalidArgument("compaction_threads is 0");
  if (io_queue_depth == 0 || io_async_threads == 0) {
    return Status::InvalidArgument("io queue depth and thread count must be positive");
  }
  if (max_immutables == 0) return Status::InvalidArgument("max_immutables is 0");
  return Status::OK();
}

Status EngineConfig::Set(std::string_view key, std::string_view value) {
  key = Trim(key);
  value = Trim(value);
  uint64_t n = 0;
  auto bad = [&] {
    return Status::InvalidArgument(std::string(key) + ": bad value '" + std::string(value) + "'");
  };
  auto size_field = [&](uint64_t* field) {
    if (!ParseU64(value, &n)) return bad();
    *field = n;
    return Status::OK();
  };
  auto u32_field = [&](uint32_t* field) {
    if (!ParseU64(value, &n) || n > UINT32_MAX) return bad();
    *field = static_cast<uint32_t>(n);
    return Status::OK();
  };
  auto bool_field = [&](bool* field) { return ParseBool(value, field) ? Status::OK() : bad(); };
  auto ms_field = [&](std::chrono::milliseconds* field) {
    if (!ParseU64(value, &n)) return bad();
    *field = std::chrono::milliseconds(n);
    return Status::OK();
  };

  if (key == "memtable_limit") return size_field(&memtable_limit);
  if (key == "sst_target_size") return size_field(&sst_target_size);
  if (key == "merge_buffer_size") return size_field(&merge_buffer_size);
  if (key == "base_level_size") return size_field(&base_level_size);
  if (key == "max_value_size") return size_field(&max_value_size);
  if (key == "l0_compaction_trigger") return u32_field(&l0_compaction_trigger);
  if (key == "level_size_ratio") return u32_field(&level_size_ratio);
  if (key == "compaction_threads") return u32_field(&compaction_threads);
  if (key == "max_immutables") return u32_field(&max_immutables);
  if (key == "l0_stall_files") return u32_field(&l0_stall_files);
  if (key == "pending_compaction_bytes_stall") return size_field(&pending_compaction_bytes_stall);
  if (key == "wal_fsync_each_write") return bool_field(&wal_fsync_each_write);
  if (key == "io.backend") {
    auto b = ParseIoBackend(value);
    if (!b) return bad();
    io_backend = *b;
    return Status::OK();
  }
  if (key == "io.sim_write_latency_us_per_mib") return size_field(&sim_write_latency_us_per_mib);
  if (key == "io.sim_fsync_latency_us") return size_field(&sim_fsync_latency_us);
  if (key == "io.direct_poll") return bool_field(&direct_io_poll);
  if (key == "io.real_fsync") return bool_field(&real_fsync);
  if (key == "io.queue_depth") return u32_field(&io_queue_depth);
  if (key == "io.async_threads") return u32_field(&io_async_threads);
  if (key == "ledger.sweep_max_age_ms") return ms_field(&ledger_sweep_max_age);
  if (key == "ledger.sweep_interval_ms") return ms_field(&ledger_sweep_interval);
  if (key == "ledger.fsync_retry_limit") return u32_field(&fsync_retry_limit);
  return Status::InvalidArgument("unknown config key: " + std::string(key));
}

Status EngineConfig::ParseText(std::string_view text) {
  size_t line_no = 0;
  while (!text.empty()) {
    size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      return Status::InvalidArgument("line " + std::to_string(line_no) + ": expected key=value");
    }
    Status s = Set(line.substr(0, eq), line.substr(eq + 1));
    if (!s.ok()) {
      return Status::InvalidArgument("line " + std::to_string(line_no) + ": " + s.message());
    }
  }
  return Status::OK();
}

Status EngineConfig::LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return Status::IOError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseText(ss.str());
}

std::string EngineConfig::ToText() const {
  std::ostringstream o;
  o << "memtable_limit=" << memtable_limit << "\n"
    << "sst_target_size=" << sst_target_size << "\n"
    << "merge_buffer_size=" << merge_buffer_size << "\n"
    << "base_level_size=" << base_level_size << "\n"
    << "max_value_size=" << max_value_size << "\n"
    << "l0_compaction_trigger=" << l0_compaction_trigger << "\n"
    << "level_size_ratio=" << level_size_ratio << "\n"
    << "compaction_threads=" << compaction_threads << "\n"
    << "max_immutables=" << max_immutables << "\n"
    << "l0_stall_files=" << l0_stall_files << "\n"
    << "pending_compaction_bytes_stall=" << pending_compaction_bytes_stall << "\n"
    << "wal_fsync_each_write=" << (wal_fsync_each_write ? "true" : "false") << "\n"
    << "io.backend=" << IoBackendName(io_backend) << "\n"
    << "io.sim_write_latency_us_per_mib=" << sim_write_latency_us_per_mib << "\n"
    << "io.sim_fsync_latency_us=" << sim_fsync_latency_us << "\n"
    << "io.direct_poll=" << (direct_io_poll ? "true" : "false") << "\n"
    << "io.real_fsync=" << (real_fsync ? "true" : "false") << "\n"
    << "io.queue_depth=" << io_queue_depth << "\n"
    << "io.async_threads=" << io_async_threads << "\n"
    << "ledger.sweep_max_age_ms=" << ledger_sweep_max_age.count() << "\n"
    << "ledger.sweep_interval_ms=" << ledger_sweep_interval.count() << "\n"
    << "ledger.fsync_retry_limit=" << fsync_retry_limit << "\n";
  return o.str();
}

std::optional<uint64_t> LevelCapacity(const EngineConfig& config, int level) {
  if (level <= 0) return std::nullopt;
  uint64_t cap = config.base_level_size;
  for (int i = 1; i < level; ++i) cap *= config.level_size_ratio;
  return cap;
}

}  // namespace alsm
