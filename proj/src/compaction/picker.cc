#include "compaction/picker.h"

#include <algorithm>

namespace alsm {

std::vector<FileRef> CompactionInputs::AllInputs() const {
  std::vector<FileRef> all = inputs_n;
  all.insert(all.end(), inputs_n1.begin(), inputs_n1.end());
  return all;
}

uint64_t CompactionInputs::InputBytes() const {
  uint64_t total = 0;
  for (const auto& f : inputs_n) total += f->meta.file_size;
  for (const auto& f : inputs_n1) total += f->meta.file_size;
  return total;
}

std::array<double, kNumLevels> CompactionScores(const Version& v, const EngineConfig& config,
                                                const std::set<uint64_t>& being_compacted) {
  std::array<double, kNumLevels> scores{};
  for (int level = 0; level < kNumLevels - 1; ++level) {
    uint64_t count = 0, bytes = 0;
    for (const auto& f : v.files(level)) {
      if (being_compacted.count(f->meta.file_id.value)) continue;
      ++count;
      bytes += f->meta.file_size;
    }
    if (level == 0) {
      scores[level] = static_cast<double>(count) / config.l0_compaction_trigger;
    } else {
      scores[level] = static_cast<double>(bytes) / static_cast<double>(*LevelCapacity(config, level));
    }
  }
  return scores;
}

namespace {

void Widen(const SstMeta& m, std::string* lo, std::string* hi, bool first) {
  if (first || m.smallest_user_key() < *lo) lo->assign(m.smallest_user_key());
  if (first || m.largest_user_key() > *hi) hi->assign(m.largest_user_key());
}

bool AnyBusy(const std::vector<FileRef>& files, const std::set<uint64_t>& busy) {
  return std::any_of(files.begin(), files.end(),
                     [&](const FileRef& f) { return busy.count(f->meta.file_id.value) > 0; });
}

bool ConflictsInflight(int output_level, const std::string& lo, const std::string& hi,
                       const std::vector<KeyRange>& inflight) {
  for (const auto& r : inflight) {
    if (r.output_level == output_level && !(hi < r.lo || lo > r.hi)) return true;
  }
  return false;
}

// Completes a candidate with its level n+1 overlap; false if it conflicts.
bool Complete(const Version& v, const std::set<uint64_t>& busy,
              const std::vector<KeyRange>& inflight, CompactionInputs* c) {
  if (AnyBusy(c->inputs_n, busy)) return false;
  c->inputs_n1 = v.Overlapping(c->output_level, c->lo, c->hi);
  if (AnyBusy(c->inputs_n1, busy)) return false;
  for (const auto& f : c->inputs_n1) Widen(f->meta, &c->lo, &c->hi, false);
  if (ConflictsInflight(c->output_level, c->lo, c->hi, inflight)) return false;
  c->is_bottom = true;
  for (int deeper = c->output_level + 1; deeper < kNumLevels; ++deeper) {
    if (v.NumFiles(deeper) > 0) c->is_bottom = false;
  }
  return true;
}

std::optional<CompactionInputs> PickLevel0(const Version& v, const std::set<uint64_t>& busy,
                                           const std::vector<KeyRange>& inflight) {
  const auto& files = v.files(0);
  if (files.empty() || AnyBusy(files, busy)) return std::nullopt;
  CompactionInputs c;
  c.level = 0;
  c.output_level = 1;
  std::vector<bool> chosen(files.size(), false);
  chosen.back() = true;  // oldest
  Widen(files.back()->meta, &c.lo, &c.hi, true);
  for (bool grew = true; grew;) {
    grew = false;
    for (size_t i = 0; i < files.size(); ++i) {
      if (chosen[i]) continue;
      const auto& m = files[i]->meta;
      if (m.largest_user_key() < c.lo || m.smallest_user_key() > c.hi) continue;
      chosen[i] = true;
      Widen(m, &c.lo, &c.hi, false);
      grew = true;
    }
  }
  for (size_t i = 0; i < files.size(); ++i) {
    if (chosen[i]) c.inputs_n.push_back(files[i]);
  }
  if (!Complete(v, busy, inflight, &c)) return std::nullopt;
  return c;
}

std::optional<CompactionInputs> PickDeeper(const Version& v, int level,
                                           const std::set<uint64_t>& busy,
                                           const std::vector<KeyRange>& inflight,
                                           const std::string& pointer) {
  const auto& files = v.files(level);
  if (files.empty()) return std::nullopt;
  size_t start = 0;
  while (start < files.size() && !pointer.empty() &&
         files[start]->meta.smallest_user_key() <= pointer) {
    ++start;
  }
  for (size_t k = 0; k < files.size(); ++k) {
    const FileRef& seed = files[(start + k) % files.size()];
    CompactionInputs c;
    c.level = level;
    c.output_level = level + 1;
    c.inputs_n.push_back(seed);
    Widen(seed->meta, &c.lo, &c.hi, true);
    if (Complete(v, busy, inflight, &c)) return c;
  }
  return std::nullopt;
}

}  // namespace

std::optional<CompactionInputs> PickCompaction(const Version& v, const EngineConfig& config,
                                               std::set<uint64_t>* being_compacted,
                                               std::array<std::string, kNumLevels>* pointers,
                                               const std::vector<KeyRange>& inflight) {
  const auto scores = CompactionScores(v, config, *being_compacted);
  std::vector<int> order;
  for (int level = 0; level < kNumLevels - 1; ++level) {
    if (scores[level] >= 1.0) order.push_back(level);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  for (int level : order) {
    auto c = level == 0 ? PickLevel0(v, *being_compacted, inflight)
                        : PickDeeper(v, level, *being_compacted, inflight, (*pointers)[level]);
    if (!c) continue;
    c->score = scores[level];
    if (level > 0) (*pointers)[level] = c->inputs_n.front()->meta.largest_user_key();
    for (const auto& f : c->AllInputs()) being_compacted->insert(f->meta.file_id.value);
    return c;
  }
  return std::nullopt;
}

}  // namespace alsm
