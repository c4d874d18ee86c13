#include "io/io_engine.h"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <thread>

#include "util/test_util.h"

namespace alsm::io {
namespace {

using test::TempDir;

IoEngineOptions Options(IoBackend backend, uint64_t write_us_per_mib = 0, uint64_t fsync_us = 0) {
  IoEngineOptions o;
  o.backend = backend;
  o.latency = {write_us_per_mib, fsync_us};
  o.real_fsync = false;
  return o;
}

std::shared_ptr<WritableFile> NewFile(FileSystem& fs, const std::string& path) {
  std::shared_ptr<WritableFile> f;
  EXPECT_TRUE(fs.NewWritableFile(path, &f).ok());
  return f;
}

class IoBackendTest : public ::testing::TestWithParam<IoBackend> {};

TEST_P(IoBackendTest, WriteLandsAndEventIsDeliveredOnce) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam()));
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  ReqId id = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Write(f, 0, std::string(1 << 20, 'x')), &cq, &id).ok());
  const ReqId ids[] = {id};
  auto r = io.WaitAll(cq, ids);
  ASSERT_TRUE(r.complete);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_TRUE(r.events[0].status.ok());
  EXPECT_EQ(r.events[0].buffer.size(), 1u << 20);  // buffer handed back
  EXPECT_TRUE(cq.Poll().empty());
  std::string data;
  ASSERT_TRUE(fs.ReadFile(f->path(), &data).ok());
  EXPECT_EQ(data, std::string(1 << 20, 'x'));
}

TEST_P(IoBackendTest, PollWithNothingInFlightIsEmpty) {
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam()));
  CompletionQueue cq;
  EXPECT_TRUE(cq.Poll().empty());
}

TEST_P(IoBackendTest, WaitAllThenPollReturnsNoneOfTheWaitedIds) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam()));
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  std::vector<ReqId> ids;
  for (int i = 0; i < 16; ++i) {
    ReqId id = 0;
    ASSERT_TRUE(io.Submit(IoRequest::Write(f, i * 100, std::string(100, 'a' + i)), &cq, &id).ok());
    ids.push_back(id);
  }
  auto r = io.WaitAll(cq, ids);
  ASSERT_TRUE(r.complete);
  std::multiset<ReqId> delivered;
  for (auto& ev : r.events) delivered.insert(ev.id);
  for (auto& ev : cq.Poll()) delivered.insert(ev.id);
  EXPECT_EQ(delivered, std::multiset<ReqId>(ids.begin(), ids.end()));
}

TEST_P(IoBackendTest, FsyncOfClosedFileFailsAtCompletion) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam()));
  auto f = NewFile(fs, dir.Sub("a"));
  ASSERT_TRUE(fs.Close(*f).ok());
  CompletionQueue cq;
  ReqId id = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &id).ok());
  const ReqId ids[] = {id};
  auto r = io.WaitAll(cq, ids);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_TRUE(r.events[0].status.IsIOError());
  ReqId wid = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Write(f, 0, "zz"), &cq, &wid).ok());
  const ReqId wids[] = {wid};
  r = io.WaitAll(cq, wids);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_FALSE(r.events[0].status.ok());
}

TEST_P(IoBackendTest, InjectedFsyncFailureNamesTheFailedMember) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam()));
  auto a = NewFile(fs, dir.Sub("a"));
  auto b = NewFile(fs, dir.Sub("b"));
  CompletionQueue cq;
  io.InjectFsyncFailures(1);
  ReqId id = 0;
  ASSERT_TRUE(io.Submit(IoRequest::FsyncBatch({a, b}), &cq, &id).ok());
  const ReqId ids[] = {id};
  auto r = io.WaitAll(cq, ids);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_TRUE(r.events[0].status.IsIOError());
  EXPECT_EQ(r.events[0].failed_paths, std::vector<std::string>{a->path()});
}

// Randomized multi-threaded schedule: every submitted request yields exactly
// one delivered event, and a batch fsync never completes before the writes
// to its member files that were submitted ahead of it.
TEST_P(IoBackendTest, ExactlyOnceAndDurabilityOrderUnderRandomSchedule) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam(), 200, 300));
  constexpr int kThreads = 3;
  std::vector<std::thread> threads;
  std::atomic<int> violations{0};
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937_64 rng(t + 11);
      CompletionQueue cq;
      std::vector<std::shared_ptr<WritableFile>> files;
      for (int i = 0; i < 3; ++i) files.push_back(NewFile(fs, dir.Sub(std::to_string(t * 10 + i))));
      std::vector<uint64_t> offsets(files.size(), 0);
      std::vector<std::vector<ReqId>> writes_of(files.size());
      std::vector<ReqId> submitted;
      std::map<ReqId, std::vector<ReqId>> batch_covers;
      std::map<ReqId, int> delivered;
      std::map<ReqId, Clock::time_point> done_at;
      auto record = [&](std::vector<CompletionEvent> evs) {
        for (auto& ev : evs) {
          ++delivered[ev.id];
          done_at[ev.id] = ev.complete_time;
        }
      };
      for (int step = 0; step < 200; ++step) {
        ReqId id = 0;
        if (rng() % 4 != 0) {
          const size_t f = rng() % files.size();
          const size_t n = 1 + rng() % 4096;
          ASSERT_TRUE(io.Submit(IoRequest::Write(files[f], offsets[f], std::string(n, 'w')), &cq, &id).ok());
          offsets[f] += n;
          writes_of[f].push_back(id);
        } else {
          std::vector<std::shared_ptr<WritableFile>> members;
          std::vector<ReqId> covers;
          for (size_t f = 0; f < files.size(); ++f) {
            if (rng() % 2) {
              members.push_back(files[f]);
              covers.insert(covers.end(), writes_of[f].begin(), writes_of[f].end());
            }
          }
          if (members.empty()) continue;
          ASSERT_TRUE(io.Submit(IoRequest::FsyncBatch(members), &cq, &id).ok());
          batch_covers[id] = covers;
        }
        submitted.push_back(id);
        if (rng() % 5 == 0) record(cq.Poll());
      }
      std::vector<ReqId> rest;
      for (ReqId id : submitted) {
        if (!delivered.count(id)) rest.push_back(id);
      }
      record(io.WaitAll(cq, rest).events);
      record(cq.Poll());
      if (delivered.size() != submitted.size()) ++violations;
      for (ReqId id : submitted) {
        if (delivered[id] != 1) ++violations;
      }
      for (const auto& [batch, covers] : batch_covers) {
        for (ReqId w : covers) {
          if (done_at[w] > done_at[batch]) ++violations;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(violations.load(), 0);
  EXPECT_EQ(io.stats().submitted, io.stats().completed);
}

TEST_P(IoBackendTest, BatchCompletionImpliesMemberWritesDurable) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(GetParam(), 2000, 500));
  CompletionQueue cq;
  std::vector<std::shared_ptr<WritableFile>> files;
  for (int i = 0; i < 3; ++i) files.push_back(NewFile(fs, dir.Sub(std::to_string(i))));
  std::vector<ReqId> writes;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      ReqId id = 0;
      ASSERT_TRUE(io.Submit(IoRequest::Write(files[i], j * 65536, std::string(65536, 'a')), &cq, &id).ok());
      writes.push_back(id);
    }
  }
  ReqId batch = 0;
  ASSERT_TRUE(io.Submit(IoRequest::FsyncBatch(files), &cq, &batch).ok());
  const ReqId ids[] = {batch};
  auto r = io.WaitAll(cq, ids);
  ASSERT_TRUE(r.events.at(0).status.ok());
  const auto batch_time = r.events[0].complete_time;
  for (auto& f : files) EXPECT_EQ(f->durable_bytes(), 4u * 65536);
  for (auto& ev : io.WaitAll(cq, writes).events) EXPECT_LE(ev.complete_time, batch_time);
}

INSTANTIATE_TEST_SUITE_P(Backends, IoBackendTest,
                         ::testing::Values(IoBackend::kSync, IoBackend::kAsync,
                                           IoBackend::kSimulated),
                         [](const auto& info) { return std::string(IoBackendName(info.param)); });

TEST(SimulatedBackend, FsyncBatchCompletesNoEarlierThanConfiguredLatency) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(IoBackend::kSimulated, 0, 5000));
  std::vector<std::shared_ptr<WritableFile>> files;
  for (int i = 0; i < 3; ++i) files.push_back(NewFile(fs, dir.Sub(std::to_string(i))));
  CompletionQueue cq;
  ReqId id = 0;
  const auto t0 = Clock::now();
  ASSERT_TRUE(io.Submit(IoRequest::FsyncBatch(files), &cq, &id).ok());
  // Submission itself does not wait for the device.
  EXPECT_LT(Clock::now() - t0, std::chrono::milliseconds(5));
  const ReqId ids[] = {id};
  auto r = io.WaitAll(cq, ids);
  const auto waited = Clock::now() - t0;
  EXPECT_GE(waited, std::chrono::milliseconds(5));
  EXPECT_GE(r.events.at(0).complete_time - r.events[0].submit_time, std::chrono::milliseconds(5));
}

TEST(SimulatedBackend, WaitAllTimesOutWithPartialResult) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(IoBackend::kSimulated, 0, 200000));
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  ReqId w = 0;
  ReqId s = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Write(f, 0, "abc"), &cq, &w).ok());
  ASSERT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &s).ok());
  const ReqId ids[] = {w, s};
  auto r = io.WaitAll(cq, ids, std::chrono::milliseconds(20));
  EXPECT_FALSE(r.complete);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].id, w);
  const ReqId rest[] = {s};
  EXPECT_TRUE(io.WaitAll(cq, rest).complete);
}

TEST(SyncBackend, WritePaysLatencyInsideSubmit) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(IoBackend::kSync, 10000, 0));  // 10 ms per MiB
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  ReqId id = 0;
  const auto t0 = Clock::now();
  ASSERT_TRUE(io.Submit(IoRequest::Write(f, 0, std::string(1 << 20, 'z')), &cq, &id).ok());
  EXPECT_GE(Clock::now() - t0, std::chrono::milliseconds(10));
  EXPECT_EQ(cq.pending(), 1u);
}

TEST(IoEngineControl, SetBackendRefusedWhileBusy) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(IoBackend::kSimulated, 0, 50000));
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  ReqId id = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &id).ok());
  EXPECT_TRUE(io.SetBackend(IoBackend::kSync, {}).IsBusy());
  const ReqId ids[] = {id};
  io.WaitAll(cq, ids);
  EXPECT_TRUE(io.SetBackend(IoBackend::kSync, {0, 10000}).ok());
  EXPECT_EQ(io.backend(), IoBackend::kSync);
}

TEST(IoEngineControl, QueueDepthSignalsBackpressure) {
  TempDir dir;
  FileSystem fs;
  auto o = Options(IoBackend::kSimulated, 0, 50000);
  o.queue_depth = 2;
  IoEngine io(&fs, o);
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  ReqId a = 0;
  ReqId b = 0;
  ReqId c = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &a).ok());
  ASSERT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &b).ok());
  EXPECT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &c).IsBusy());
  const ReqId ids[] = {a, b};
  io.WaitAll(cq, ids);
  EXPECT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &c).ok());
  const ReqId last[] = {c};
  io.WaitAll(cq, last);
}

TEST(IoEngineControl, DirectPollKeepsSemantics) {
  TempDir dir;
  FileSystem fs;
  auto o = Options(IoBackend::kAsync);
  o.direct_poll = true;
  IoEngine io(&fs, o);
  auto f = NewFile(fs, dir.Sub("a"));
  CompletionQueue cq;
  ReqId w = 0;
  ReqId s = 0;
  ASSERT_TRUE(io.Submit(IoRequest::Write(f, 0, "abc"), &cq, &w).ok());
  ASSERT_TRUE(io.Submit(IoRequest::Fsync(f), &cq, &s).ok());
  const ReqId ids[] = {w, s};
  auto r = io.WaitAll(cq, ids);
  EXPECT_TRUE(r.complete);
  EXPECT_EQ(r.events.size(), 2u);
  EXPECT_EQ(f->durable_bytes(), 3u);
}

// The same program trace leaves byte-identical files under every backend.
TEST(BackendEquivalence, FinalContentsAreIdentical) {
  std::map<IoBackend, std::vector<std::string>> contents;
  for (IoBackend b : {IoBackend::kSync, IoBackend::kAsync, IoBackend::kSimulated}) {
    TempDir dir;
    FileSystem fs;
    IoEngine io(&fs, Options(b, 100, 100));
    std::mt19937_64 rng(99);
    std::vector<std::shared_ptr<WritableFile>> files;
    for (int i = 0; i < 4; ++i) files.push_back(NewFile(fs, dir.Sub(std::to_string(i))));
    std::vector<uint64_t> off(files.size(), 0);
    CompletionQueue cq;
    std::vector<ReqId> ids;
    for (int step = 0; step < 300; ++step) {
      const size_t f = rng() % files.size();
      std::string buf = test::RandomBytes(rng, 1 + rng() % 3000);
      ReqId id = 0;
      ASSERT_TRUE(io.Submit(IoRequest::Write(files[f], off[f], buf), &cq, &id).ok());
      off[f] += buf.size();
      ids.push_back(id);
    }
    ReqId batch = 0;
    ASSERT_TRUE(io.Submit(IoRequest::FsyncBatch(files), &cq, &batch).ok());
    ids.push_back(batch);
    ASSERT_TRUE(io.WaitAll(cq, ids).complete);
    for (auto& f : files) {
      std::string data;
      ASSERT_TRUE(fs.ReadFile(f->path(), &data).ok());
      contents[b].push_back(data);
    }
  }
  EXPECT_EQ(contents[IoBackend::kSync], contents[IoBackend::kAsync]);
  EXPECT_EQ(contents[IoBackend::kSync], contents[IoBackend::kSimulated]);
}

TEST(PowerLoss, UnsyncedBytesAndNeverSyncedFilesDisappear) {
  TempDir dir;
  FileSystem fs;
  IoEngine io(&fs, Options(IoBackend::kSync));
  auto synced = NewFile(fs, dir.Sub("synced"));
  auto fresh = NewFile(fs, dir.Sub("fresh"));
  ASSERT_TRUE(fs.Append(*synced, "durable").ok());
  ASSERT_TRUE(io.SyncNow(*synced).ok());
  ASSERT_TRUE(fs.Append(*synced, "-lost").ok());
  ASSERT_TRUE(fs.Append(*fresh, "gone").ok());
  fs.SimulatePowerLoss();
  std::string data;
  ASSERT_TRUE(fs.ReadFile(synced->path(), &data).ok());
  EXPECT_EQ(data, "durable");
  EXPECT_FALSE(fs.FileExists(fresh->path()));
}

}  // namespace
}  // namespace alsm::io
