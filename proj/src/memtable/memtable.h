#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "db/dbformat.h"
#include "memtable/arena.h"
#include "memtable/skiplist.h"
#include "table/iterator.h"

namespace alsm {

// Ordered in-memory buffer of records. One writer at a time (the engine's
// write lock); readers need no synchronization.
class MemTable {
 public:
  enum class State { kMutable, kImmutable };

  // Bytes charged against memtable_limit for one record.
  static uint64_t Charge(std::string_view user_key, std::string_view value) {
    return user_key.size() + value.size() + kRecordOverhead;
  }
  static constexpr uint64_t kRecordOverhead = 16;

  MemTable();
  MemTable(const MemTable&) = delete;
  MemTable& operator=(const MemTable&) = delete;

  void Add(SequenceNumber seq, ValueKind kind, std::string_view user_key,
           std::string_view value);

  // Looks up the newest record for user_key with seqno <= snapshot.
  // Returns true when a record was found; *deleted tells whether it is a tombstone.
  bool Get(std::string_view user_key, SequenceNumber snapshot, std::string* value,
           bool* deleted) const;

  std::unique_ptr<Iterator> NewIterator() const;

  uint64_t ApproximateBytes() const { return charged_.load(std::memory_order_relaxed); }
  uint64_t ArenaBytes() const { return arena_.MemoryUsage(); }
  uint64_t Entries() const { return entries_.load(std::memory_order_relaxed); }
  bool Empty() const { return Entries() == 0; }
  SequenceNumber MaxSeqno() const { return max_seqno_.load(std::memory_order_relaxed); }

  State state() const { return state_.load(); }
  void Freeze() { state_.store(State::kImmutable); }

  // WAL segments whose records live in this memtable; deleted after flush.
  std::vector<FileId>& wal_segments() { return wal_segments_; }
  const std::vector<FileId>& wal_segments() const { return wal_segments_; }

 private:
  // Entries point at arena memory: [u32 ikey_len][ikey][u32 vlen][value].
  struct KeyComparator {
    int operator()(const char* a, const char* b) const;
  };
  using Table = SkipList<const char*, KeyComparator>;
  class MemIterator;

  Arena arena_;
  Table table_;
  std::atomic<uint64_t> charged_{0};
  std::atomic<uint64_t> entries_{0};
  std::atomic<SequenceNumber> max_seqno_{0};
  std::atomic<State> state_{State::kMutable};
  std::vector<FileId> wal_segments_;
};

}  // namespace alsm
