#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "criteria.h"
#include "ledger/durability_ledger.h"

namespace acceptance {

namespace {

using alsm::DurabilityLedger;
using alsm::EpochId;
using alsm::FileId;
using alsm::LedgerEntry;
using alsm::LedgerHooks;
using alsm::SstMeta;
using alsm::Status;
using alsm::VersionEdit;
using alsm::io::Clock;
using alsm::io::ReqId;

std::string PathOf(uint64_t id) { return "/fuzz/" + std::to_string(id) + ".sst"; }

uint64_t IdOf(const std::string& path) {
  return std::stoull(path.substr(6, path.size() - 6 - 4));
}

// What the disk and the MANIFEST hold, maintained only from the side effects
// the ledger performs through its hooks.
struct FileState {
  bool base = false;
  bool on_disk = true;
  bool synced = false;  // contents on stable media
  bool marked = false;  // MANIFEST says durable
  int deletes = 0;
  uint64_t origin = 0;  // producing epoch, 0 for base files
};

struct EpochState {
  std::vector<uint64_t> parents;
  std::vector<uint64_t> offspring;
  bool closed = false;
};

struct Batch {
  uint64_t epoch = 0;
  std::vector<uint64_t> files;
};

class Schedule {
 public:
  explicit Schedule(uint64_t seed) : rng_(seed), t0_(Clock::now()) {
    ledger_ = std::make_unique<DurabilityLedger>(Hooks(), 1 + rng_() % 3);
    const int base = 2 + static_cast<int>(rng_() % 6);
    for (int i = 0; i < base; ++i) {
      const uint64_t id = next_file_++;
      files_[id].base = true;
      files_[id].synced = true;
      live_.push_back(id);
    }
  }

  // Runs `steps` random actions, checking the model after each, then drains.
  void Run(int steps) {
    for (int s = 0; s < steps && violations_.empty(); ++s) {
      now_ms_ = s;
      Step();
      CheckQuiescent("step " + std::to_string(s));
    }
    if (!violations_.empty()) return;
    Drain();
  }

  const std::vector<std::string>& violations() const { return violations_; }
  uint64_t epochs() const { return epochs_.size(); }
  uint64_t fallbacks() const { return ledger_->stats().fallback_waits; }
  uint64_t rebuilds() const { return ledger_->stats().rebuilt_files; }

 private:
  LedgerHooks Hooks() {
    LedgerHooks h;
    h.log_edit = [this](VersionEdit* e) {
      for (auto id : e->marked_durable) {
        FileState& f = files_[id.value];
        if (!f.synced) Violation("offspring " + std::to_string(id.value) + " marked durable before it was synced");
        if (!f.on_disk) Violation("offspring " + std::to_string(id.value) + " marked durable after deletion");
        f.marked = true;
      }
      for (auto ep : e->ledger_closed) {
        EpochState& st = epochs_[ep.value];
        if (st.closed) Violation("epoch " + std::to_string(ep.value) + " closed twice");
        for (uint64_t p : st.parents) {
          if (files_[p].on_disk) Violation("epoch " + std::to_string(ep.value) + " closed with a parent on disk");
        }
        st.closed = true;
      }
      return Status::OK();
    };
    h.delete_files = [this](const std::vector<SstMeta>& metas) {
      for (const auto& m : metas) {
        const uint64_t id = m.file_id.value;
        FileState& f = files_[id];
        if (f.deletes++ > 0) Violation("parent " + std::to_string(id) + " deleted twice");
        // An open ledger entry still names this file; it has to close first.
        if (f.origin != 0 && !epochs_[f.origin].closed) {
          Violation("file " + std::to_string(id) + " deleted while its epoch " + std::to_string(f.origin) +
                    " is open");
        }
        if (std::find(live_.begin(), live_.end(), id) != live_.end()) {
          Violation("live file " + std::to_string(id) + " deleted");
        }
        const auto consumer = consumed_by_.find(id);
        if (consumer == consumed_by_.end()) {
          Violation("deleted file " + std::to_string(id) + " was never a parent");
        } else {
          for (uint64_t o : epochs_[consumer->second].offspring) {
            if (!files_[o].marked) {
              Violation("parent " + std::to_string(id) + " deleted before offspring " + std::to_string(o) +
                        " was durable");
            }
          }
        }
        f.on_disk = false;
      }
      return Status::OK();
    };
    h.resubmit = [this](const LedgerEntry& e, const std::vector<std::string>& paths, ReqId* id) {
      Batch b;
      b.epoch = e.epoch.value;
      for (const auto& p : paths) b.files.push_back(IdOf(p));
      if (b.files.empty()) b.files = epochs_[b.epoch].offspring;
      *id = next_batch_++;
      inflight_[*id] = std::move(b);
      return Status::OK();
    };
    h.rebuild = [this](const LedgerEntry& e, const std::string& path) {
      if (rebuild_failure_rate_ > 0 && Chance(rebuild_failure_rate_)) {
        return Status::IOError("rebuild failed: " + path);
      }
      for (const auto& p : e.parents) {
        if (!files_[p.file_id.value].on_disk) {
          Violation("rebuild of " + path + " found parent " + std::to_string(p.file_id.value) + " gone");
        }
      }
      files_[IdOf(path)].synced = true;
      return Status::OK();
    };
    h.wait = [this](ReqId id) {
      if (!inflight_.count(id)) {
        // The ledger should only wait on a batch it has no completion for.
        Violation("wait on batch " + std::to_string(id) + " that is not in flight");
        ledger_->OnBatchComplete(id, Status::OK(), {}, Clock::now());
        return;
      }
      Deliver(id);
    };
    return h;
  }

  bool Chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

  template <class T>
  T Pick(const std::vector<T>& v) {
    return v[rng_() % v.size()];
  }

  void Violation(std::string what) {
    if (violations_.size() < 8) violations_.push_back(std::move(what));
  }

  void Register() {
    if (live_.empty()) return;
    const uint64_t epoch = next_epoch_++;
    EpochState st;
    const size_t n_parents = std::min<size_t>(live_.size(), 1 + rng_() % 4);
    std::shuffle(live_.begin(), live_.end(), rng_);
    st.parents.assign(live_.begin(), live_.begin() + static_cast<long>(n_parents));
    live_.erase(live_.begin(), live_.begin() + static_cast<long>(n_parents));
    const size_t n_offspring = 1 + rng_() % 3;
    for (size_t i = 0; i < n_offspring; ++i) {
      const uint64_t id = next_file_++;
      files_[id].origin = epoch;
      st.offspring.push_back(id);
      live_.push_back(id);
    }
    for (uint64_t p : st.parents) consumed_by_[p] = epoch;

    LedgerEntry e;
    e.epoch = EpochId{epoch};
    e.output_level = 1 + static_cast<int>(rng_() % 5);
    for (uint64_t p : st.parents) {
      SstMeta m;
      m.file_id = FileId{p};
      e.parents.push_back(m);
    }
    for (uint64_t o : st.offspring) {
      SstMeta m;
      m.file_id = FileId{o};
      e.offspring.push_back(m);
      e.offspring_paths.push_back(PathOf(o));
    }
    e.batch_id = next_batch_++;
    e.opened_at = t0_ + std::chrono::milliseconds(now_ms_);
    inflight_[e.batch_id] = Batch{epoch, st.offspring};
    epochs_[epoch] = std::move(st);
    ledger_->Register(std::move(e));
  }

  // Lands one batch: every member syncs, or a random non-empty subset fails.
  void Deliver(ReqId id) {
    Batch b = std::move(inflight_.at(id));
    inflight_.erase(id);
    std::vector<std::string> failed;
    if (Chance(failure_rate_)) {
      for (uint64_t f : b.files) {
        if (Chance(0.5)) failed.push_back(PathOf(f));
      }
      if (failed.empty()) failed.push_back(PathOf(Pick(b.files)));
    }
    for (uint64_t f : b.files) {
      if (std::find(failed.begin(), failed.end(), PathOf(f)) == failed.end()) files_[f].synced = true;
    }
    Status s = failed.empty() ? Status::OK() : Status::IOError("injected fsync failure");
    ledger_->OnBatchComplete(id, std::move(s), std::move(failed), Clock::now());
  }

  std::vector<FileId> SampleInputs() {
    std::vector<FileId> ids;
    const size_t n = 1 + rng_() % 4;
    for (size_t i = 0; i < n && !live_.empty(); ++i) ids.push_back(FileId{Pick(live_)});
    // Occasionally name files that are already gone.
    if (Chance(0.2) && next_file_ > 1) ids.push_back(FileId{1 + rng_() % (next_file_ - 1)});
    return ids;
  }

  void Step() {
    const double r = std::uniform_real_distribution<double>(0, 1)(rng_);
    const auto now = t0_ + std::chrono::milliseconds(now_ms_);
    if (r < 0.30) {
      Register();
    } else if (r < 0.55) {
      if (!inflight_.empty()) {
        auto it = inflight_.begin();
        std::advance(it, static_cast<long>(rng_() % inflight_.size()));
        Deliver(it->first);
      }
    } else if (r < 0.72) {
      ledger_->Checkup(SampleInputs(), false);
    } else if (r < 0.84) {
      ledger_->Checkup(SampleInputs(), true);
    } else if (r < 0.94) {
      ledger_->Sweep(std::chrono::milliseconds(rng_() % 20), now);
    } else if (r < 0.97) {
      ledger_->RetireAll();
    } else {
      while (!inflight_.empty()) Deliver(inflight_.begin()->first);
    }
  }

  // A live file must be recoverable: marked durable (or base), or still
  // backed by on-disk parents that are themselves recoverable.
  bool Recoverable(uint64_t id, std::map<uint64_t, bool>& memo) {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    const FileState& f = files_.at(id);
    bool ok = f.on_disk && (f.base || f.marked);
    if (!ok && f.on_disk && f.origin != 0) {
      ok = true;
      for (uint64_t p : epochs_.at(f.origin).parents) ok = ok && Recoverable(p, memo);
    }
    memo[id] = ok;
    return ok;
  }

  void CheckQuiescent(const std::string& where) {
    std::map<uint64_t, bool> memo;
    for (uint64_t id : live_) {
      if (!Recoverable(id, memo)) Violation(where + ": live file " + std::to_string(id) + " has no durable ancestor chain");
    }
    size_t open = 0;
    for (const auto& [epoch, st] : epochs_) {
      open += st.closed ? 0 : 1;
      for (uint64_t o : st.offspring) {
        if (ledger_->IsVolatile(FileId{o}) == st.closed) {
          Violation(where + ": volatility of " + std::to_string(o) + " disagrees with epoch " + std::to_string(epoch));
        }
      }
    }
    if (ledger_->OpenCount() != open) {
      Violation(where + ": ledger reports " + std::to_string(ledger_->OpenCount()) + " open entries, model has " +
                std::to_string(open));
    }
  }

  void Drain() {
    failure_rate_ = 0;
    rebuild_failure_rate_ = 0;
    while (!inflight_.empty()) Deliver(inflight_.begin()->first);
    auto r = ledger_->RetireAll();
    if (!r.status.ok()) Violation("final retire failed: " + r.status.ToString());
    CheckQuiescent("drain");
    if (ledger_->OpenCount() != 0) Violation("entries left open after drain");
    for (const auto& [id, f] : files_) {
      const bool consumed = consumed_by_.count(id) > 0;
      if (consumed && f.deletes != 1) Violation("parent " + std::to_string(id) + " deleted " + std::to_string(f.deletes) + " times");
      if (!consumed && !f.on_disk) Violation("unconsumed file " + std::to_string(id) + " deleted");
      if (!consumed && !f.base && !f.marked) Violation("live offspring " + std::to_string(id) + " never marked durable");
    }
  }

  std::mt19937_64 rng_;
  const Clock::time_point t0_;
  int64_t now_ms_ = 0;
  double failure_rate_ = 0.15;
  double rebuild_failure_rate_ = 0.1;
  std::unique_ptr<DurabilityLedger> ledger_;
  std::map<uint64_t, FileState> files_;
  std::map<uint64_t, EpochState> epochs_;
  std::map<uint64_t, uint64_t> consumed_by_;  // parent -> consuming epoch
  std::map<ReqId, Batch> inflight_;
  std::vector<uint64_t> live_;
  std::vector<std::string> violations_;
  uint64_t next_file_ = 1;
  uint64_t next_epoch_ = 1;
  ReqId next_batch_ = 1;
};

}  // namespace

Verdict LedgerScheduleFuzz(uint64_t interleavings, uint64_t seed) {
  uint64_t failed = 0;
  uint64_t epochs = 0;
  uint64_t fallbacks = 0;
  uint64_t rebuilds = 0;
  std::string first;
  for (uint64_t i = 0; i < interleavings; ++i) {
    Schedule s(seed * 1000003 + i);
    s.Run(60);
    epochs += s.epochs();
    fallbacks += s.fallbacks();
    rebuilds += s.rebuilds();
    if (!s.violations().empty()) {
      if (failed++ == 0) first = "schedule " + std::to_string(i) + ": " + s.violations().front();
    }
  }
  std::ostringstream d;
  d << interleavings << " schedules, " << epochs << " epochs, " << fallbacks << " fallback waits, " << rebuilds
    << " rebuilt files, " << failed << " with violations";
  if (failed > 0) d << "; first: " << first;
  return {failed == 0, d.str()};
}

}  // namespace acceptance
