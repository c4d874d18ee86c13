#include "alsm/c_api.h"

#include <cstdlib>
#include <cstring>

#include <json.hpp>

#include "db/db.h"
#include "util/crash_point.h"

using alsm::Status;

struct alsm_options {
  alsm::EngineConfig config;
};

struct alsm_db {
  std::unique_ptr<alsm::DB> db;
};

struct alsm_iterator {
  std::unique_ptr<alsm::Iterator> it;
};

namespace {

thread_local std::string g_last_error;

int Report(const Status& s) {
  if (!s.ok()) g_last_error = s.ToString();
  return static_cast<int>(s.code());
}

char* Dup(std::string_view s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) return nullptr;
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

}  // namespace

extern "C" {

const char* alsm_code_name(int code) {
  static const char* const kNames[] = {"ok",        "not_found", "corruption",
                                       "io_error",  "invalid_argument", "busy",
                                       "closed",    "timed_out", "aborted"};
  if (code < 0 || code > 8) return "unknown";
  return kNames[code];
}

const char* alsm_last_error(void) { return g_last_error.c_str(); }

void alsm_free(void* p) { std::free(p); }

alsm_options* alsm_options_create(void) { return new alsm_options(); }

void alsm_options_destroy(alsm_options* opts) { delete opts; }

int alsm_options_set(alsm_options* opts, const char* key, const char* value) {
  if (opts == nullptr || key == nullptr || value == nullptr) {
    return Report(Status::InvalidArgument("null argument"));
  }
  return Report(opts->config.Set(key, value));
}

int alsm_options_load_file(alsm_options* opts, const char* path) {
  if (opts == nullptr || path == nullptr) return Report(Status::InvalidArgument("null argument"));
  return Report(opts->config.LoadFile(path));
}

char* alsm_options_to_text(const alsm_options* opts) {
  return opts == nullptr ? nullptr : Dup(opts->config.ToText());
}

int alsm_open(const alsm_options* opts, const char* dir, alsm_db** out) {
  if (dir == nullptr || out == nullptr) return Report(Status::InvalidArgument("null argument"));
  alsm::EngineConfig config = opts != nullptr ? opts->config : alsm::EngineConfig();
  std::unique_ptr<alsm::DB> db;
  Status s = alsm::DB::Open(config, dir, &db);
  if (!s.ok()) return Report(s);
  *out = new alsm_db{std::move(db)};
  return ALSM_OK;
}

int alsm_close(alsm_db* db) {
  if (db == nullptr) return ALSM_OK;
  Status s = db->db->Close();
  delete db;
  return Report(s);
}

int alsm_put(alsm_db* db, const char* key, size_t key_len, const char* value, size_t value_len) {
  if (db == nullptr || (key == nullptr && key_len > 0) || (value == nullptr && value_len > 0)) {
    return Report(Status::InvalidArgument("null argument"));
  }
  return Report(db->db->Put({key, key_len}, {value, value_len}));
}

int alsm_delete(alsm_db* db, const char* key, size_t key_len) {
  if (db == nullptr || (key == nullptr && key_len > 0)) {
    return Report(Status::InvalidArgument("null argument"));
  }
  return Report(db->db->Delete({key, key_len}));
}

int alsm_get(alsm_db* db, const char* key, size_t key_len, char** value, size_t* value_len) {
  if (db == nullptr || value == nullptr || value_len == nullptr ||
      (key == nullptr && key_len > 0)) {
    return Report(Status::InvalidArgument("null argument"));
  }
  std::string v;
  Status s = db->db->Get({key, key_len}, &v);
  if (!s.ok()) return Report(s);
  *value = Dup(v);
  *value_len = v.size();
  return ALSM_OK;
}

int alsm_flush(alsm_db* db) { return Report(db->db->Flush()); }

int alsm_wait_idle(alsm_db* db) { return Report(db->db->WaitForIdle()); }

uint64_t alsm_last_seqno(alsm_db* db) { return db->db->LastSequence(); }

int alsm_ledger_sweep(alsm_db* db, uint64_t max_age_ms, uint64_t* retired) {
  auto r = db->db->LedgerSweep(std::chrono::milliseconds(max_age_ms));
  if (retired != nullptr) *retired = r.retired.size();
  return Report(r.status);
}

char* alsm_ledger_dump(alsm_db* db) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : db->db->LedgerDump()) {
    nlohmann::json j;
    j["epoch"] = e.epoch.value;
    j["state"] = alsm::LedgerStateName(e.state);
    j["output_level"] = e.output_level;
    j["age_seconds"] = e.age_seconds;
    for (const auto& p : e.parents) j["parents"].push_back(p.value);
    for (const auto& o : e.offspring) j["offspring"].push_back(o.value);
    arr.push_back(std::move(j));
  }
  return Dup(arr.dump());
}

char* alsm_inspect_ledger(const char* dir) {
  if (dir == nullptr) {
    Report(Status::InvalidArgument("null argument"));
    return nullptr;
  }
  alsm::io::FileSystem fs;
  std::string image;
  Status s = fs.ReadFile(alsm::ManifestFileName(dir), &image);
  alsm::ReplayedState st;
  if (s.ok()) s = alsm::ReplayManifest(image, &st);
  if (!s.ok()) {
    Report(s);
    return nullptr;
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [epoch, rec] : st.open_entries) {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["fsync_batch_id"] = rec.fsync_batch_id;
    j["output_level"] = rec.output_level;
    j["drop_tombstones"] = rec.drop_tombstones;
    j["parents"] = nlohmann::json::array();
    j["offspring"] = nlohmann::json::array();
    for (const auto& p : rec.parents) j["parents"].push_back(p.file_id.value);
    for (const auto& o : rec.offspring) j["offspring"].push_back(o.value);
    arr.push_back(std::move(j));
  }
  return Dup(arr.dump());
}

char* alsm_metrics(alsm_db* db) { return Dup(db->db->Metrics().ToJson()); }

char* alsm_property(alsm_db* db, const char* name) {
  if (db == nullptr || name == nullptr) return nullptr;
  auto v = db->db->GetProperty(name);
  return v ? Dup(*v) : nullptr;
}

char* alsm_crash_points(void) {
  std::string out;
  for (const auto& p : alsm::crash::KnownPoints()) out += p + "\n";
  return Dup(out);
}

void alsm_inject_fsync_failures(alsm_db* db, uint32_t n) { db->db->io()->InjectFsyncFailures(n); }

alsm_iterator* alsm_iterator_create(alsm_db* db) {
  if (db == nullptr) return nullptr;
  return new alsm_iterator{db->db->NewIterator()};
}

void alsm_iterator_destroy(alsm_iterator* it) { delete it; }

void alsm_iterator_seek_to_first(alsm_iterator* it) { it->it->SeekToFirst(); }

void alsm_iterator_seek(alsm_iterator* it, const char* key, size_t key_len) {
  it->it->Seek({key, key_len});
}

int alsm_iterator_valid(const alsm_iterator* it) { return it->it->Valid() ? 1 : 0; }

void alsm_iterator_next(alsm_iterator* it) { it->it->Next(); }

const char* alsm_iterator_key(const alsm_iterator* it, size_t* len) {
  std::string_view k = it->it->key();
  if (len != nullptr) *len = k.size();
  return k.data();
}

const char* alsm_iterator_value(const alsm_iterator* it, size_t* len) {
  std::string_view v = it->it->value();
  if (len != nullptr) *len = v.size();
  return v.data();
}

int alsm_iterator_status(const alsm_iterator* it) { return Report(it->it->status()); }

}  // extern "C"
