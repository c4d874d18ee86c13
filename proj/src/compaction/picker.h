#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "db/config.h"
#include "version/version_set.h"

namespace alsm {

struct CompactionInputs {
  int level = 0;  // source level n; outputs go to n + 1
  int output_level = 1;
  double score = 0;
  std::vector<FileRef> inputs_n;
  std::vector<FileRef> inputs_n1;
  // No level below output_level holds data, so tombstones can be dropped.
  bool is_bottom = false;
  std::string lo;  // user-key span of all inputs
  std::string hi;

  std::vector<FileRef> AllInputs() const;
  uint64_t InputBytes() const;
};

// Compaction score of every level: L0 by file count over the trigger,
// deeper levels by bytes over capacity. Files already being compacted are
// not counted. The last level always scores 0.
std::array<double, kNumLevels> CompactionScores(const Version& v, const EngineConfig& config,
                                                const std::set<uint64_t>& being_compacted);

// Chooses the level with the highest score >= 1 (ties toward the smaller
// level) and a seed there: the oldest level-0 file grown to its overlap
// closure, or the next file after the level's round-robin pointer. Level n+1
// files overlapping the seed join the job. Candidates touching a file in
// `being_compacted` or writing into a range of an in-flight job are skipped.
// On success the chosen files are added to `being_compacted` and the pointer
// advances. Must run under the version lock.
std::optional<CompactionInputs> PickCompaction(const Version& v, const EngineConfig& config,
                                               std::set<uint64_t>* being_compacted,
                                               std::array<std::string, kNumLevels>* pointers,
                                               const std::vector<KeyRange>& inflight);

}  // namespace alsm
