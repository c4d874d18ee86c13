#pragma once

#include <string>
#include <vector>

#include "io/io_engine.h"
#include "util/status.h"
#include "version/file_meta.h"

namespace alsm {

// Re-derives `target` from the files it was merged from: the parents are
// merged again, restricted to target's key range, written to a temporary
// file, checked against target's checksum and size, synced and renamed over
// the original path. The result is byte-identical to the original output.
Status RebuildFromParents(const std::string& dir, io::IoEngine* io,
                          const std::vector<SstMeta>& parents, const SstMeta& target,
                          bool drop_tombstones, size_t buffer_size);

}  // namespace alsm
