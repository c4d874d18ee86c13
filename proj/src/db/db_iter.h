#pragma once

#include <memory>
#include <vector>

#include "memtable/memtable.h"
#include "table/iterator.h"
#include "version/version_set.h"

namespace alsm {

// Iterator over live user keys at `snapshot`: the newest visible record per
// key, tombstones hidden. key() returns the user key. Holds references to
// every memtable and file it reads.
std::unique_ptr<Iterator> NewUserIterator(std::vector<std::shared_ptr<MemTable>> mems,
                                          VersionRef version, SequenceNumber snapshot,
                                          size_t readahead);

}  // namespace alsm
