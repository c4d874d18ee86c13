#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>

#include "table/merge_iterator.h"
#include "table/sst_builder.h"
#include "table/sst_format.h"
#include "table/sst_reader.h"
#include "util/test_util.h"

namespace alsm {
namespace {

using test::Records;
using test::TempDir;

io::IoEngineOptions SyncOptions() {
  io::IoEngineOptions o;
  o.backend = IoBackend::kSync;
  o.real_fsync = false;
  return o;
}

std::string IK(std::string_view k, SequenceNumber s, ValueKind kind = ValueKind::kPut) {
  return MakeInternalKey(k, s, kind);
}

// Sort everything, keep the newest record per user key at or below the
// snapshot, optionally drop tombstones. Written independently of the engine.
Records BruteForceMerge(const std::vector<Records>& children, bool drop_tombstones,
                        SequenceNumber snapshot = kMaxSequenceNumber) {
  std::map<std::string, std::pair<SequenceNumber, std::pair<std::string, std::string>>> newest;
  for (const auto& child : children) {
    for (const auto& [k, v] : child) {
      ParsedInternalKey p;
      EXPECT_TRUE(ParseInternalKey(k, &p));
      if (p.seqno > snapshot) continue;
      auto it = newest.find(std::string(p.user_key));
      if (it == newest.end() || it->second.first < p.seqno) {
        newest[std::string(p.user_key)] = {p.seqno, {k, v}};
      }
    }
  }
  Records out;
  for (const auto& [user, rec] : newest) {
    ParsedInternalKey p;
    ParseInternalKey(rec.second.first, &p);
    if (drop_tombstones && p.kind == ValueKind::kDelete) continue;
    out.push_back(rec.second);
  }
  return out;
}

std::vector<Records> RandomChildren(std::mt19937_64& rng, int max_children, int max_records,
                                    int key_space) {
  const int n = 1 + static_cast<int>(rng() % max_children);
  std::vector<Records> children(n);
  std::set<SequenceNumber> used;
  for (auto& child : children) {
    const int m = static_cast<int>(rng() % (max_records + 1));
    for (int i = 0; i < m; ++i) {
      SequenceNumber seq;
      do {
        seq = 1 + rng() % 1000000;
      } while (!used.insert(seq).second);
      const auto kind = rng() % 5 == 0 ? ValueKind::kDelete : ValueKind::kPut;
      child.emplace_back(IK(test::KeyOf(rng() % key_space), seq, kind),
                         kind == ValueKind::kPut ? test::RandomBytes(rng, rng() % 20) : "");
    }
    test::SortRecords(&child);
  }
  return children;
}

std::unique_ptr<Iterator> MergeOf(const std::vector<Records>& children, MergeOptions mo) {
  std::vector<std::unique_ptr<Iterator>> its;
  for (const auto& c : children) its.push_back(test::NewVectorIterator(c));
  return NewMergeIterator(std::move(its), mo);
}

TEST(Merge, SingleChildIsIdentity) {
  Records r = {{IK("a", 1), "1"}, {IK("b", 2), "2"}, {IK("c", 3), "3"}};
  auto it = MergeOf({r}, MergeOptions{});
  EXPECT_EQ(test::Collect(it.get()), r);
}

TEST(Merge, InterleavesChildren) {
  Records a = {{IK("a", 1), "a1"}, {IK("c", 3), "c3"}};
  Records b = {{IK("b", 2), "b2"}};
  auto it = MergeOf({a, b}, MergeOptions{});
  EXPECT_EQ(test::Collect(it.get()),
            (Records{{IK("a", 1), "a1"}, {IK("b", 2), "b2"}, {IK("c", 3), "c3"}}));
}

TEST(Merge, NewestVersionOfDuplicateKeyWins) {
  Records a = {{IK("k", 3), "old"}};
  Records b = {{IK("k", 7), "new"}};
  auto it = MergeOf({a, b}, MergeOptions{});
  EXPECT_EQ(test::Collect(it.get()), (Records{{IK("k", 7), "new"}}));
}

TEST(Merge, TombstonesKeptUnlessBottom) {
  Records a = {{IK("k", 3), "v"}};
  Records b = {{IK("k", 5, ValueKind::kDelete), ""}, {IK("m", 4), "m"}};
  MergeOptions keep;
  EXPECT_EQ(test::Collect(MergeOf({a, b}, keep).get()),
            (Records{{IK("k", 5, ValueKind::kDelete), ""}, {IK("m", 4), "m"}}));
  MergeOptions drop;
  drop.drop_tombstones = true;
  EXPECT_EQ(test::Collect(MergeOf({a, b}, drop).get()), (Records{{IK("m", 4), "m"}}));
}

TEST(Merge, RandomizedAgainstBruteForce) {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 300; ++round) {
    auto children = RandomChildren(rng, 6, 60, 40);
    MergeOptions mo;
    mo.drop_tombstones = rng() % 2;
    mo.snapshot = rng() % 3 == 0 ? rng() % 1000000 : kMaxSequenceNumber;
    auto got = test::Collect(MergeOf(children, mo).get());
    ASSERT_EQ(got, BruteForceMerge(children, mo.drop_tombstones, mo.snapshot)) << round;
  }
}

TEST(Merge, RawHeapMergeKeepsEveryEntryInOrder) {
  std::mt19937_64 rng(5);
  auto children = RandomChildren(rng, 5, 80, 30);
  Records all;
  for (const auto& c : children) all.insert(all.end(), c.begin(), c.end());
  test::SortRecords(&all);
  std::vector<std::unique_ptr<Iterator>> its;
  for (const auto& c : children) its.push_back(test::NewVectorIterator(c));
  auto it = NewHeapMergeIterator(std::move(its));
  EXPECT_EQ(test::Collect(it.get()), all);
}

class SstTest : public ::testing::Test {
 protected:
  TempDir dir_;
  io::FileSystem fs_;
  io::IoEngine io_{&fs_, SyncOptions()};
};

TEST_F(SstTest, ThreeRecordsRoundTrip) {
  Records r = {{IK("a", 3), "1"}, {IK("b", 2), "2"}, {IK("c", 1), "3"}};
  test::BuiltSst b;
  ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("t.sst"), FileId{1}, r, 1 << 20, &b).ok());
  std::shared_ptr<SstReader> reader;
  ASSERT_TRUE(SstReader::Open(b.path, &reader).ok());
  EXPECT_EQ(test::Collect(reader->NewIterator().get()), r);
  EXPECT_EQ(reader->record_count(), 3u);
  EXPECT_EQ(reader->smallest(), IK("a", 3));
  EXPECT_EQ(reader->largest(), IK("c", 1));
  EXPECT_EQ(b.meta.checksum, reader->checksum());
  EXPECT_TRUE(reader->VerifyContents().ok());
}

TEST_F(SstTest, FooterCarriesMagicAndFileSizeMatchesMeta) {
  Records r = {{IK("a", 1), "x"}};
  test::BuiltSst b;
  ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("t.sst"), FileId{1}, r, 1 << 20, &b).ok());
  std::string data;
  ASSERT_TRUE(fs_.ReadFile(b.path, &data).ok());
  EXPECT_EQ(data.size(), b.meta.file_size);
  EXPECT_EQ(data.substr(data.size() - 4), std::string("AISL"));
}

TEST_F(SstTest, GetReturnsNewestVisibleAndTombstones) {
  Records r = {{IK("a", 9), "a9"},
               {IK("a", 4), "a4"},
               {IK("b", 6, ValueKind::kDelete), ""},
               {IK("b", 2), "b2"}};
  test::BuiltSst b;
  ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("t.sst"), FileId{1}, r, 1 << 20, &b).ok());
  std::shared_ptr<SstReader> reader;
  ASSERT_TRUE(SstReader::Open(b.path, &reader).ok());
  std::string v;
  bool deleted = false;
  ASSERT_TRUE(reader->Get("a", kMaxSequenceNumber, &v, &deleted).ok());
  EXPECT_EQ(v, "a9");
  ASSERT_TRUE(reader->Get("a", 5, &v, &deleted).ok());
  EXPECT_EQ(v, "a4");
  EXPECT_TRUE(reader->Get("a", 3, &v, &deleted).IsNotFound());
  ASSERT_TRUE(reader->Get("b", 10, &v, &deleted).ok());
  EXPECT_TRUE(deleted);
  ASSERT_TRUE(reader->Get("b", 5, &v, &deleted).ok());
  EXPECT_FALSE(deleted);
  EXPECT_EQ(v, "b2");
  EXPECT_TRUE(reader->Get("c", 10, &v, &deleted).IsNotFound());
}

// Records whose encoded file is 2.5 MiB go out as exactly three 1 MiB-buffer
// submissions: ceil(file_size / buffer).
TEST_F(SstTest, TwoAndAHalfMiBIsThreeSubmissions) {
  // 2560 entries of 1000-byte values encode to about 2.5 MiB.
  Records r;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2560; ++i) r.emplace_back(IK(test::KeyOf(i), 1), test::RandomBytes(rng, 1000));
  test::BuiltSst b;
  ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("t.sst"), FileId{1}, r, 1 << 20, &b).ok());
  const uint64_t mib = 1 << 20;
  ASSERT_GT(b.meta.file_size, 2 * mib);
  ASSERT_LE(b.meta.file_size, 3 * mib);
  EXPECT_EQ(b.buffers_submitted, (b.meta.file_size + mib - 1) / mib);
  EXPECT_EQ(b.buffers_submitted, 3u);
}

TEST_F(SstTest, SubmissionCountMatchesByteAccountingForRandomSizes) {
  std::mt19937_64 rng(9);
  for (int round = 0; round < 20; ++round) {
    Records r;
    const int n = 1 + static_cast<int>(rng() % 3000);
    for (int i = 0; i < n; ++i) r.emplace_back(IK(test::KeyOf(i), 1), test::RandomBytes(rng, rng() % 300));
    const size_t buffer = 4096 << (rng() % 6);
    test::BuiltSst b;
    ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("r" + std::to_string(round)), FileId{1}, r, buffer, &b).ok());
    EXPECT_EQ(b.buffers_submitted, (b.meta.file_size + buffer - 1) / buffer);
  }
}

TEST_F(SstTest, FullFlagRaisedAtTargetAndOvershootIsAtMostOneRecord) {
  std::shared_ptr<io::WritableFile> file;
  ASSERT_TRUE(fs_.NewWritableFile(dir_.Sub("t.sst"), &file).ok());
  io::CompletionQueue cq;
  BufferPool pool(64 << 10);
  SstBuilderOptions bo;
  bo.target_file_size = 256 << 10;
  bo.wait_each_buffer = true;
  SstBuilder builder(bo, &io_, &cq, &pool, file, FileId{1});
  std::mt19937_64 rng(10);
  int i = 0;
  uint64_t before = 0;
  while (!builder.Full()) {
    before = builder.EstimatedFileSize();
    ASSERT_TRUE(builder.Add(IK(test::KeyOf(i++), 1), test::RandomBytes(rng, 500)).ok());
  }
  EXPECT_LT(before, bo.target_file_size);
  SstMeta meta;
  ASSERT_TRUE(builder.Finish(&meta).ok());
  EXPECT_GE(meta.file_size, bo.target_file_size);
  // One more record is at most its entry plus a new block and index entry.
  EXPECT_LE(meta.file_size - before, 500 + 64 + 2 * kBlockTrailerSize + kIndexEntryFixed + 64);
}

TEST_F(SstTest, UnsortedInputAbortsTheBuild) {
  std::shared_ptr<io::WritableFile> file;
  ASSERT_TRUE(fs_.NewWritableFile(dir_.Sub("t.sst"), &file).ok());
  io::CompletionQueue cq;
  BufferPool pool(64 << 10);
  SstBuilder builder(SstBuilderOptions{}, &io_, &cq, &pool, file, FileId{1});
  ASSERT_TRUE(builder.Add(IK("b", 1), "x").ok());
  EXPECT_TRUE(builder.Add(IK("a", 1), "x").IsInvalidArgument());
  SstMeta meta;
  EXPECT_FALSE(builder.Finish(&meta).ok());
}

TEST_F(SstTest, CorruptionIsDetected) {
  Records r;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) r.emplace_back(IK(test::KeyOf(i), 1), test::RandomBytes(rng, 50));
  test::BuiltSst b;
  ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("t.sst"), FileId{1}, r, 1 << 20, &b).ok());
  std::string data;
  ASSERT_TRUE(fs_.ReadFile(b.path, &data).ok());

  auto write = [&](const std::string& path, const std::string& bytes) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  };
  // A flipped data byte: footer still opens, content verification fails.
  std::string flipped = data;
  flipped[100] ^= 0x01;
  write(dir_.Sub("data.sst"), flipped);
  std::shared_ptr<SstReader> reader;
  ASSERT_TRUE(SstReader::Open(dir_.Sub("data.sst"), &reader).ok());
  EXPECT_TRUE(reader->VerifyContents().IsCorruption());

  // A flipped footer byte or a truncated file never opens.
  std::string bad_footer = data;
  bad_footer[data.size() - 10] ^= 0x01;
  write(dir_.Sub("footer.sst"), bad_footer);
  EXPECT_TRUE(SstReader::Open(dir_.Sub("footer.sst"), &reader).IsCorruption());
  write(dir_.Sub("short.sst"), data.substr(0, data.size() / 2));
  EXPECT_FALSE(SstReader::Open(dir_.Sub("short.sst"), &reader).ok());
}

TEST_F(SstTest, RandomRoundTripsAndSeeks) {
  std::mt19937_64 rng(12);
  for (int round = 0; round < 30; ++round) {
    Records r;
    auto children = RandomChildren(rng, 1, 1500, 2000);
    r = children[0];
    if (r.empty()) continue;
    test::BuiltSst b;
    ASSERT_TRUE(test::BuildSst(&io_, dir_.Sub("r" + std::to_string(round)), FileId{1}, r, 8192, &b).ok());
    std::shared_ptr<SstReader> reader;
    ASSERT_TRUE(SstReader::Open(b.path, &reader).ok());
    auto it = reader->NewIterator(rng() % 2 ? 0 : 16384);
    ASSERT_EQ(test::Collect(it.get()), r);
    for (int q = 0; q < 20; ++q) {
      const std::string target = IK(test::KeyOf(rng() % 2100), rng() % 1000000);
      auto expect = std::lower_bound(r.begin(), r.end(), target, [](const auto& rec, const std::string& t) {
        return CompareEncodedInternalKeys(rec.first, t) < 0;
      });
      it->Seek(target);
      if (expect == r.end()) {
        ASSERT_FALSE(it->Valid());
      } else {
        ASSERT_TRUE(it->Valid());
        ASSERT_EQ(it->key(), expect->first);
      }
    }
  }
}

}  // namespace
}  // namespace alsm
