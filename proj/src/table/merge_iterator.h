#pragma once

#include <memory>
#include <vector>

#include "db/dbformat.h"
#include "table/iterator.h"

namespace alsm {

struct MergeOptions {
  // Emit only the newest visible record per user key.
  bool dedup = true;
  // Swallow tombstones (compaction into the bottom level, user scans).
  bool drop_tombstones = false;
  // Records newer than this are invisible.
  SequenceNumber snapshot = kMaxSequenceNumber;
};

// Raw k-way merge: every child entry, in internal-key order. Children must be
// individually sorted.
std::unique_ptr<Iterator> NewHeapMergeIterator(std::vector<std::unique_ptr<Iterator>> children);

// K-way merge with newest-wins deduplication applied on top of the heap merge.
std::unique_ptr<Iterator> NewMergeIterator(std::vector<std::unique_ptr<Iterator>> children,
                                           MergeOptions options);

}  // namespace alsm
