#include "engine.h"

#include <stdlib.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bench {

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string TakeString(char* p) {
  if (p == nullptr) return "";
  std::string s(p);
  alsm_free(p);
  return s;
}

}  // namespace

uint64_t ParseSize(std::string_view text) {
  std::string t = Trim(text);
  if (t.empty()) throw std::invalid_argument("empty size");
  uint64_t mult = 1;
  switch (std::toupper(static_cast<unsigned char>(t.back()))) {
    case 'K':
      mult = 1ull << 10;
      break;
    case 'M':
      mult = 1ull << 20;
      break;
    case 'G':
      mult = 1ull << 30;
      break;
  }
  if (mult != 1) t.pop_back();
  size_t used = 0;
  const uint64_t n = std::stoull(t, &used);
  if (used != t.size()) throw std::invalid_argument("bad size '" + std::string(text) + "'");
  return n * mult;
}

void Settings::SetAssignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw std::invalid_argument("expected key=value, got '" + std::string(assignment) + "'");
  }
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

void Settings::LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (Trim(line).empty()) continue;
    SetAssignment(line);
  }
}

Engine::Engine(const Settings& settings, const std::string& dir) {
  alsm_options* opts = alsm_options_create();
  for (const auto& [k, v] : settings.values()) {
    const int rc = alsm_options_set(opts, k.c_str(), v.c_str());
    if (rc != ALSM_OK) {
      alsm_options_destroy(opts);
      throw EngineError("option " + k, rc);
    }
  }
  const int rc = alsm_open(opts, dir.c_str(), &db_);
  alsm_options_destroy(opts);
  Check(rc, "open " + dir);
}

Engine::~Engine() {
  if (db_ != nullptr) alsm_close(db_);
}

void Engine::Close() {
  alsm_db* db = db_;
  db_ = nullptr;
  Check(alsm_close(db), "close");
}

bool Engine::Get(std::string_view key, std::string* value) {
  char* v = nullptr;
  size_t n = 0;
  const int rc = alsm_get(db_, key.data(), key.size(), &v, &n);
  if (rc == ALSM_NOT_FOUND) return false;
  Check(rc, "get");
  value->assign(v, n);
  alsm_free(v);
  return true;
}

uint64_t Engine::LedgerSweep(uint64_t max_age_ms) {
  uint64_t retired = 0;
  Check(alsm_ledger_sweep(db_, max_age_ms, &retired), "ledger sweep");
  return retired;
}

nlohmann::json Engine::LedgerDump() { return nlohmann::json::parse(TakeString(alsm_ledger_dump(db_))); }

nlohmann::json Engine::Metrics() { return nlohmann::json::parse(TakeString(alsm_metrics(db_))); }

std::string Engine::Property(const std::string& name) {
  char* p = alsm_property(db_, name.c_str());
  if (p == nullptr) throw std::invalid_argument("unknown property " + name);
  return TakeString(p);
}

std::map<std::string, std::string> Engine::Scan() {
  std::map<std::string, std::string> out;
  Cursor c(*this);
  for (c.SeekToFirst(); c.Valid(); c.Next()) out.emplace(c.key(), c.value());
  c.CheckStatus();
  return out;
}

ScratchDir::ScratchDir(const std::string& parent) {
  const std::filesystem::path base =
      parent.empty() ? std::filesystem::temp_directory_path() : std::filesystem::path(parent);
  std::filesystem::create_directories(base);
  std::string tmpl = (base / "alsm-bench-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed under " + base.string());
  path_ = tmpl;
}

ScratchDir::~ScratchDir() {
  if (!keep_) {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
}

}  // namespace bench
