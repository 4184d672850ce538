#include <gtest/gtest.h>

#include <atomic>

#include "fsa/memory_meter.hpp"
#include "fsa/parallel.hpp"

using namespace fsa;

TEST(MemoryMeter, CurrentAndPeak) {
  MemoryMeter m;
  m.acquire(100);
  m.acquire(50);
  m.release(100);
  EXPECT_EQ(m.current(), 50u);
  EXPECT_EQ(m.peak(), 150u);
  m.reset_peak();
  EXPECT_EQ(m.peak(), 50u);
}

TEST(MemoryMeterDeathTest, ReleaseWithoutAcquireAborts) {
  ::testing::FLAGS_gtest_death_test_style = "threadsafe";
  EXPECT_DEATH(
      {
        MemoryMeter m;
        m.acquire(10);
        m.release(11);
      },
      "release");
}

TEST(MeterLease, ReleasesOnScopeExitAndMove) {
  MemoryMeter m;
  {
    MeterLease a(&m, 64);
    EXPECT_EQ(m.current(), 64u);
    MeterLease b(std::move(a));
    EXPECT_EQ(m.current(), 64u);
    MeterLease c(&m, 8);
    c = std::move(b);
    EXPECT_EQ(m.current(), 64u);
  }
  EXPECT_EQ(m.current(), 0u);
  EXPECT_EQ(m.peak(), 72u);
}

TEST(TrackedBuffer, RegistersItsBytes) {
  MemoryMeter m;
  {
    TrackedBuffer<double> b(10, 1.5, &m);
    EXPECT_EQ(m.current(), 80u);
    EXPECT_EQ(b[9], 1.5);
    TrackedBuffer<double> moved = std::move(b);
    EXPECT_EQ(m.current(), 80u);
    moved.release();
    EXPECT_EQ(m.current(), 0u);
  }
  EXPECT_EQ(m.current(), 0u);
  TrackedBuffer<int> untracked(5, 0, nullptr);
  EXPECT_EQ(untracked.size(), 5u);
}

TEST(ParallelChunks, CoversRangeExactlyOnce) {
  for (unsigned w : {1u, 3u, 8u, 20u}) {
    std::vector<std::atomic<int>> hits(17);
    parallel_chunks(17, w, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelChunks, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(100, 4, [](std::size_t i) {
                 if (i == 63) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(ParallelChunks, EmptyRangeIsNoOp) {
  int calls = 0;
  parallel_chunks(0, 4, [&](std::size_t, std::size_t b, std::size_t e) { calls += e > b; });
  EXPECT_EQ(calls, 0);
}
