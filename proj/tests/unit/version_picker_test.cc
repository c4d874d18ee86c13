#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "compaction/picker.h"
#include "table/sst_format.h"
#include "version/version_set.h"
#include "util/test_util.h"

namespace alsm {
namespace {

using test::TempDir;

io::IoEngineOptions SyncOptions() {
  io::IoEngineOptions o;
  o.backend = IoBackend::kSync;
  o.real_fsync = false;
  return o;
}

// A VersionSet over a scratch directory. Files are real (tiny) SSTs whose
// recorded size may be inflated so level scores can be set precisely.
class VersionFixture {
 public:
  explicit VersionFixture(EngineConfig config) : config_(config) { Reopen(); }

  void Reopen() {
    vs_ = std::make_unique<VersionSet>(dir_.path(), config_, &io_);
    ReplayedState st;
    ASSERT_TRUE(vs_->Recover(&st).ok());
    ASSERT_TRUE(vs_->Install(st).ok());
  }

  SstMeta MakeFile(int level, const std::string& lo, const std::string& hi, uint64_t size,
                   SequenceNumber seq) {
    const FileId id = vs_->NewFileId();
    test::Records r = {{MakeInternalKey(lo, seq, ValueKind::kPut), "v"}};
    if (hi != lo) r.emplace_back(MakeInternalKey(hi, seq, ValueKind::kPut), "v");
    test::BuiltSst b;
    EXPECT_TRUE(test::BuildSst(&io_, SstFileName(dir_.path(), id), id, r, 4096, &b).ok());
    b.meta.level = level;
    b.meta.file_size = size;
    b.meta.max_seqno = seq;
    return b.meta;
  }

  SstMeta Add(int level, const std::string& lo, const std::string& hi, uint64_t size,
              SequenceNumber seq = 1) {
    SstMeta m = MakeFile(level, lo, hi, size, seq);
    VersionEdit e;
    e.added.push_back(m);
    EXPECT_TRUE(vs_->LogAndApply(&e, false).ok());
    return m;
  }

  VersionSet* vs() { return vs_.get(); }
  io::IoEngine* io() { return &io_; }
  const std::string& dir() const { return dir_.path(); }
  const EngineConfig& config() const { return config_; }

 private:
  TempDir dir_;
  EngineConfig config_;
  io::FileSystem fs_;
  io::IoEngine io_{&fs_, SyncOptions()};
  std::unique_ptr<VersionSet> vs_;
};

EngineConfig PickerConfig() {
  EngineConfig c;
  c.base_level_size = 1000;
  c.l0_compaction_trigger = 4;
  c.real_fsync = false;
  return c;
}

std::vector<uint64_t> Ids(const std::vector<FileRef>& files) {
  std::vector<uint64_t> out;
  for (const auto& f : files) out.push_back(f->meta.file_id.value);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<CompactionInputs> Pick(VersionFixture& fx) {
  std::lock_guard l(fx.vs()->mutex());
  return PickCompaction(*fx.vs()->current(), fx.config(), &fx.vs()->being_compacted(),
                        &fx.vs()->compact_pointer(), fx.vs()->inflight());
}

TEST(Picker, NothingWhenEveryLevelIsUnderItsLimit) {
  VersionFixture fx(PickerConfig());
  fx.Add(0, "a", "b", 10);
  fx.Add(1, "a", "z", 900);
  fx.Add(2, "a", "z", 9000);
  EXPECT_FALSE(Pick(fx).has_value());
}

// Brute-force score of every level compared to the engine's, then the pick.
TEST(Picker, LevelZeroWinsWithFiveFilesAgainstHalfFullLevelOne) {
  VersionFixture fx(PickerConfig());
  for (int i = 0; i < 5; ++i) fx.Add(0, "k" + std::to_string(i), "k" + std::to_string(i) + "z", 10, i + 1);
  fx.Add(1, "a", "z", 500);
  const auto scores = CompactionScores(*fx.vs()->current(), fx.config(), {});
  EXPECT_DOUBLE_EQ(scores[0], 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(scores[1], 500.0 / 1000.0);
  auto pick = Pick(fx);
  ASSERT_TRUE(pick.has_value());
  EXPECT_EQ(pick->level, 0);
  EXPECT_EQ(pick->output_level, 1);
  EXPECT_DOUBLE_EQ(pick->score, 1.25);
  EXPECT_EQ(pick->inputs_n1.size(), 1u);
}

TEST(Picker, SeedPullsOnlyOverlappingNextLevelFiles) {
  VersionFixture fx(PickerConfig());
  const SstMeta seed = fx.Add(1, "c", "f", 5000);
  fx.Add(2, "a", "b", 10);
  const SstMeta de = fx.Add(2, "d", "e", 10);
  fx.Add(2, "g", "h", 10);
  auto pick = Pick(fx);
  ASSERT_TRUE(pick.has_value());
  EXPECT_EQ(pick->level, 1);
  EXPECT_EQ(Ids(pick->inputs_n), std::vector<uint64_t>{seed.file_id.value});
  EXPECT_EQ(Ids(pick->inputs_n1), std::vector<uint64_t>{de.file_id.value});
}

TEST(Picker, TiesBreakTowardTheSmallerLevel) {
  VersionFixture fx(PickerConfig());
  fx.Add(1, "a", "b", 2000);   // score 2.0
  fx.Add(2, "c", "d", 20000);  // score 2.0
  auto pick = Pick(fx);
  ASSERT_TRUE(pick.has_value());
  EXPECT_EQ(pick->level, 1);
}

TEST(Picker, FilesBeingCompactedAreNotPickedTwice) {
  VersionFixture fx(PickerConfig());
  for (int i = 0; i < 4; ++i) fx.Add(0, "a", "z", 10, i + 1);
  auto first = Pick(fx);
  ASSERT_TRUE(first.has_value());
  EXPECT_EQ(first->inputs_n.size(), 4u);
  EXPECT_FALSE(Pick(fx).has_value());
}

TEST(Picker, BottomFlagOnlyWhenNothingLivesBelow) {
  VersionFixture fx(PickerConfig());
  fx.Add(1, "a", "c", 5000);
  auto pick = Pick(fx);
  ASSERT_TRUE(pick.has_value());
  EXPECT_TRUE(pick->is_bottom);

  VersionFixture deeper(PickerConfig());
  deeper.Add(1, "a", "c", 5000);
  deeper.Add(3, "x", "y", 10);
  pick = Pick(deeper);
  ASSERT_TRUE(pick.has_value());
  EXPECT_FALSE(pick->is_bottom);
}

// Random disjoint layouts: the next-level inputs are exactly the files whose
// user-key interval intersects the seed's (interval-overlap oracle).
TEST(Picker, RandomLayoutsMatchIntervalOverlapOracle) {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 25; ++round) {
    VersionFixture fx(PickerConfig());
    auto cut_points = [&](int n) {
      std::vector<int> pts;
      while (static_cast<int>(pts.size()) < 2 * n) pts.push_back(static_cast<int>(rng() % 1000));
      std::sort(pts.begin(), pts.end());
      pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
      if (pts.size() % 2) pts.pop_back();
      return pts;
    };
    auto key = [](int x) { return test::KeyOf(x); };
    auto l1 = cut_points(3);
    auto l2 = cut_points(8);
    std::vector<std::pair<int, int>> l2_ranges;
    for (size_t i = 0; i < l2.size(); i += 2) {
      fx.Add(2, key(l2[i]), key(l2[i + 1]), 10);
      l2_ranges.emplace_back(l2[i], l2[i + 1]);
    }
    for (size_t i = 0; i < l1.size(); i += 2) fx.Add(1, key(l1[i]), key(l1[i + 1]), 800);
    auto pick = Pick(fx);
    if (l1.size() < 4) {
      continue;  // one 800-byte file is under the 1000-byte limit
    }
    ASSERT_TRUE(pick.has_value());
    ASSERT_EQ(pick->level, 1);
    ASSERT_EQ(pick->inputs_n.size(), 1u);
    const std::string lo(pick->inputs_n[0]->meta.smallest_user_key());
    const std::string hi(pick->inputs_n[0]->meta.largest_user_key());
    size_t expect = 0;
    for (auto [a, b] : l2_ranges) {
      if (!(key(b) < lo || hi < key(a))) ++expect;
    }
    ASSERT_EQ(pick->inputs_n1.size(), expect) << round;
    for (const auto& f : pick->inputs_n1) {
      EXPECT_FALSE(f->meta.largest_user_key() < lo || hi < f->meta.smallest_user_key());
    }
  }
}

// Replaying the MANIFEST from empty reproduces the in-memory version.
TEST(VersionReplay, ReplayEqualsCurrentVersionAfterRandomEdits) {
  VersionFixture fx(PickerConfig());
  std::mt19937_64 rng(21);
  std::vector<SstMeta> live;
  for (int step = 0; step < 60; ++step) {
    VersionEdit e;
    const int op = static_cast<int>(rng() % 3);
    if (op == 0 || live.empty()) {
      const int base = static_cast<int>(rng() % 900);
      SstMeta m = fx.MakeFile(static_cast<int>(rng() % 3) == 0 ? 0 : 5,
                              test::KeyOf(base + step * 1000), test::KeyOf(base + step * 1000 + 50),
                              100 + rng() % 1000, step + 1);
      m.durability = m.level == 0 || rng() % 2 ? Durability::kDurable : Durability::kVolatile;
      e.added.push_back(m);
      live.push_back(m);
    } else if (op == 1) {
      const size_t i = rng() % live.size();
      e.deleted.push_back({live[i].level, live[i].file_id});
      live.erase(live.begin() + i);
    } else {
      const size_t i = rng() % live.size();
      e.marked_durable.push_back(live[i].file_id);
      live[i].durability = Durability::kDurable;
    }
    e.last_seqno = step + 1;
    ASSERT_TRUE(fx.vs()->LogAndApply(&e, false).ok());
  }
  std::string image;
  ASSERT_TRUE(fx.io()->fs()->ReadFile(ManifestFileName(fx.dir()), &image).ok());
  ReplayedState st;
  ASSERT_TRUE(ReplayManifest(image, &st).ok());
  EXPECT_FALSE(st.torn_tail);
  auto by_id = [](std::vector<SstMeta> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.file_id < b.file_id; });
    return v;
  };
  EXPECT_EQ(by_id(st.AllMetas()), by_id(fx.vs()->current()->AllMetas()));
  EXPECT_EQ(by_id(st.AllMetas()), by_id(live));
  EXPECT_EQ(st.last_seqno, 60u);
  EXPECT_GE(st.next_file_id, fx.vs()->PeekNextFileId());
  EXPECT_TRUE(fx.vs()->current()->CheckInvariants().ok());
}

TEST(VersionReplay, TornTailKeepsEveryCompleteRecord) {
  VersionFixture fx(PickerConfig());
  std::vector<size_t> ends;
  std::string image;
  ASSERT_TRUE(fx.io()->fs()->ReadFile(ManifestFileName(fx.dir()), &image).ok());
  const size_t base = image.size();
  for (int i = 0; i < 4; ++i) {
    fx.Add(0, test::KeyOf(i), test::KeyOf(i), 10, i + 1);
    ASSERT_TRUE(fx.io()->fs()->ReadFile(ManifestFileName(fx.dir()), &image).ok());
    ends.push_back(image.size());
  }
  for (size_t cut = base; cut <= image.size(); ++cut) {
    ReplayedState st;
    ASSERT_TRUE(ReplayManifest(std::string_view(image).substr(0, cut), &st).ok());
    const size_t complete = std::upper_bound(ends.begin(), ends.end(), cut) - ends.begin();
    ASSERT_EQ(st.AllMetas().size(), complete) << cut;
    ASSERT_EQ(st.torn_tail, cut != base && std::find(ends.begin(), ends.end(), cut) == ends.end());
  }
}

TEST(VersionReplay, LedgerRecordsRoundTripThroughTheManifest) {
  VersionFixture fx(PickerConfig());
  SstMeta parent = fx.Add(1, "a", "c", 100);
  SstMeta child = fx.MakeFile(2, "a", "c", 100, 2);
  child.durability = Durability::kVolatile;
  child.birth_epoch = EpochId{7};
  VersionEdit open;
  open.deleted.push_back({1, parent.file_id});
  open.added.push_back(child);
  LedgerOpenRecord rec;
  rec.epoch = EpochId{7};
  rec.fsync_batch_id = 99;
  rec.output_level = 2;
  rec.drop_tombstones = true;
  rec.parents = {parent};
  rec.offspring = {child.file_id};
  open.ledger_opened.push_back(rec);
  ASSERT_TRUE(fx.vs()->LogAndApply(&open, false).ok());
  ASSERT_EQ(fx.vs()->OpenLedgerEntries().size(), 1u);
  EXPECT_EQ(fx.vs()->OpenLedgerEntries().at(7), rec);

  fx.Reopen();
  EXPECT_EQ(fx.vs()->OpenLedgerEntries().at(7), rec);
  EXPECT_EQ(fx.vs()->current()->Find(child.file_id)->meta.durability, Durability::kVolatile);

  VersionEdit close;
  close.marked_durable.push_back(child.file_id);
  close.ledger_closed.push_back(EpochId{7});
  ASSERT_TRUE(fx.vs()->LogAndApply(&close, false).ok());
  fx.Reopen();
  EXPECT_TRUE(fx.vs()->OpenLedgerEntries().empty());
  EXPECT_EQ(fx.vs()->current()->Find(child.file_id)->meta.durability, Durability::kDurable);
}

TEST(VersionEditCodec, RandomEditsRoundTrip) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 200; ++i) {
    VersionEdit e;
    for (int j = 0; j < static_cast<int>(rng() % 4); ++j) {
      SstMeta m;
      m.file_id = FileId{rng() % 1000};
      m.level = static_cast<int>(rng() % kNumLevels);
      m.smallest = MakeInternalKey(test::RandomBytes(rng, rng() % 10), rng() % 100, ValueKind::kPut);
      m.largest = MakeInternalKey(test::RandomBytes(rng, rng() % 10), rng() % 100, ValueKind::kDelete);
      m.file_size = rng();
      m.durability = rng() % 2 ? Durability::kDurable : Durability::kVolatile;
      m.birth_epoch = EpochId{rng() % 50};
      m.checksum = static_cast<uint32_t>(rng());
      m.record_count = rng() % 100000;
      m.max_seqno = rng() % kMaxSequenceNumber;
      e.added.push_back(m);
    }
    if (rng() % 2) e.deleted.push_back({2, FileId{rng() % 1000}});
    if (rng() % 2) e.marked_durable.push_back(FileId{rng() % 1000});
    if (rng() % 3 == 0) {
      LedgerOpenRecord r;
      r.epoch = EpochId{rng() % 100};
      r.fsync_batch_id = rng();
      r.output_level = 3;
      r.drop_tombstones = rng() % 2;
      r.parents = e.added;
      r.offspring = {FileId{1}, FileId{2}};
      e.ledger_opened.push_back(r);
    }
    if (rng() % 3 == 0) e.ledger_closed.push_back(EpochId{rng() % 100});
    if (rng() % 2) e.last_seqno = rng() % kMaxSequenceNumber;
    if (rng() % 2) e.next_file_id = rng() % 100000;
    std::string buf;
    e.EncodeTo(&buf);
    VersionEdit d;
    ASSERT_TRUE(d.DecodeFrom(buf).ok());
    ASSERT_EQ(d, e);
  }
}

TEST(VersionInvariants, OverlapAtLevelOneIsReported) {
  VersionFixture fx(PickerConfig());
  fx.Add(1, "a", "f", 10);
  EXPECT_TRUE(fx.vs()->current()->CheckInvariants().ok());
  fx.Add(1, "e", "h", 10);
  EXPECT_FALSE(fx.vs()->current()->CheckInvariants().ok());
}

TEST(VersionInvariants, FileIdsAreNeverReusedAcrossReopen) {
  VersionFixture fx(PickerConfig());
  std::set<uint64_t> seen;
  for (int i = 0; i < 5; ++i) seen.insert(fx.Add(0, "a", "b", 10, i + 1).file_id.value);
  fx.Reopen();
  for (int i = 0; i < 5; ++i) {
    const uint64_t id = fx.vs()->NewFileId().value;
    EXPECT_TRUE(seen.insert(id).second) << id;
  }
}

}  // namespace
}  // namespace alsm
