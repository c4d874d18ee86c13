#pragma once

#include <string>

#include "io/io_engine.h"
#include "util/status.h"
#include "version/version_set.h"

namespace alsm {

struct RecoveryReport {
  uint64_t entries_resolved = 0;
  uint64_t offspring_verified = 0;
  uint64_t offspring_rebuilt = 0;
};

// Resolves every ledger entry left open in `state`. Offspring are verified
// (footer and every data block against the recorded checksum); a missing or
// damaged offspring is rebuilt from its retained parents. All offspring are
// then synced, marked durable and the entry closed. Parent files become
// orphans and are removed by the caller once the new MANIFEST is installed.
Status ResolveOpenLedgerEntries(const std::string& dir, io::IoEngine* io, size_t buffer_size,
                                ReplayedState* state, RecoveryReport* report);

}  // namespace alsm
