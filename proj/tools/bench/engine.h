#pragma once

// Thin RAII wrappers over the C API. Failures throw EngineError.

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "alsm/c_api.h"

namespace bench {

class EngineError : public std::runtime_error {
 public:
  EngineError(const std::string& what, int code)
      : std::runtime_error(what + ": " + alsm_code_name(code) + " (" + alsm_last_error() + ")"),
        code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

inline void Check(int code, const std::string& what) {
  if (code != ALSM_OK) throw EngineError(what, code);
}

// Parses a byte count with an optional K, M or G (binary) suffix.
uint64_t ParseSize(std::string_view text);

// Engine settings as ordered key=value pairs, applied in order.
class Settings {
 public:
  void Set(std::string key, std::string value) { kv_[std::move(key)] = std::move(value); }
  std::string Get(const std::string& key, const std::string& fallback = "") const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  // Parses `key=value`.
  void SetAssignment(std::string_view assignment);
  void LoadFile(const std::string& path);
  const std::map<std::string, std::string>& values() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

class Engine {
 public:
  Engine(const Settings& settings, const std::string& dir);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void Put(std::string_view key, std::string_view value) {
    Check(alsm_put(db_, key.data(), key.size(), value.data(), value.size()), "put");
  }
  void Delete(std::string_view key) { Check(alsm_delete(db_, key.data(), key.size()), "delete"); }
  // False when the key is absent.
  bool Get(std::string_view key, std::string* value);

  void Flush() { Check(alsm_flush(db_), "flush"); }
  void WaitIdle() { Check(alsm_wait_idle(db_), "wait idle"); }
  uint64_t LastSeqno() { return alsm_last_seqno(db_); }
  uint64_t LedgerSweep(uint64_t max_age_ms);
  nlohmann::json LedgerDump();
  nlohmann::json Metrics();
  std::string Property(const std::string& name);
  std::map<std::string, std::string> Scan();
  void Close();
  alsm_db* raw() { return db_; }

 private:
  alsm_db* db_ = nullptr;
};

// RAII iterator.
class Cursor {
 public:
  explicit Cursor(Engine& engine) : it_(alsm_iterator_create(engine.raw())) {}
  ~Cursor() { alsm_iterator_destroy(it_); }
  Cursor(const Cursor&) = delete;
  Cursor& operator=(const Cursor&) = delete;

  void SeekToFirst() { alsm_iterator_seek_to_first(it_); }
  void Seek(std::string_view key) { alsm_iterator_seek(it_, key.data(), key.size()); }
  bool Valid() const { return alsm_iterator_valid(it_) != 0; }
  void Next() { alsm_iterator_next(it_); }
  std::string_view key() const {
    size_t n = 0;
    const char* p = alsm_iterator_key(it_, &n);
    return {p, n};
  }
  std::string_view value() const {
    size_t n = 0;
    const char* p = alsm_iterator_value(it_, &n);
    return {p, n};
  }
  void CheckStatus() const { Check(alsm_iterator_status(it_), "iterate"); }

 private:
  alsm_iterator* it_;
};

// Fresh scratch directory, removed on destruction unless kept.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& parent = "");
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::string& path() const { return path_; }
  void Keep() { keep_ = true; }

 private:
  std::string path_;
  bool keep_ = false;
};

}  // namespace bench
