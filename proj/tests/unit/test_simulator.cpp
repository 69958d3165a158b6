#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "bola/simulator.hpp"
#include "bola/traces.hpp"

using namespace bola;

namespace {

VideoManifest example_video(std::size_t chunks) {
  return constant_manifest(chunks, 3.0, {6.0, 2.962, 1.427, 0.688, 0.331});
}

NetworkTrace random_trace(std::mt19937_64& rng, bool cyclic) {
  std::uniform_real_distribution<double> dur(0.5, 40.0), bw(200.0, 9000.0), lat(0.0, 150.0);
  std::vector<TraceSegment> segs;
  const int n = 1 + static_cast<int>(rng() % 8);
  for (int i = 0; i < n; ++i) segs.push_back({dur(rng), bw(rng), lat(rng)});
  return NetworkTrace(std::move(segs), cyclic);
}

// Replays the log through the buffer recursion and checks every accounting
// identity that must hold for any session.
void check_accounting(const SessionLog& log, const VideoManifest& m) {
  const double p = m.chunk_duration_s;
  double t = 0.0, q = 0.0, stall = 0.0;
  bool playing = false;
  for (const auto& s : log.slots) {
    EXPECT_NEAR(s.start_s, t, 1e-9);
    EXPECT_NEAR(s.buffer_start_chunks, q, 1e-9);
    const double expected_stall = playing ? std::max(s.duration_s - q * p, 0.0) : s.duration_s;
    EXPECT_NEAR(s.rebuffer_s, expected_stall, 1e-9);
    q = step_buffer(q, s.duration_s, s.kind == SlotKind::Download, p);
    EXPECT_NEAR(s.buffer_end_chunks, q, 1e-9);
    playing = playing || s.kind == SlotKind::Download;
    stall += s.rebuffer_s;
    t += s.duration_s;
  }
  EXPECT_EQ(log.downloaded_chunks(), m.chunk_count());
  EXPECT_NEAR(log.last_download_end_s, t, 1e-9);
  EXPECT_NEAR(log.rebuffer_s, stall, 1e-9);
  // Every second of the session either plays video or stalls.
  EXPECT_NEAR(log.end_s, static_cast<double>(m.chunk_count()) * p + log.rebuffer_s, 1e-6);
}

}  // namespace

TEST(StepBuffer, Examples) {
  EXPECT_EQ(step_buffer(4.0, 6.0, true, 3.0), 3.0);
  EXPECT_EQ(step_buffer(0.5, 6.0, true, 3.0), 1.0);
  EXPECT_EQ(step_buffer(4.0, 1.5, false, 3.0), 3.5);
}

TEST(Simulate, SingleChunkEndTime) {
  VideoManifest m;
  m.chunk_duration_s = 2.0;
  m.levels.push_back({1000, 0.0, {4e6}});
  const NetworkTrace t({{100.0, 8000.0, 30.0}}, false);
  PlayerConfig c;
  c.v = 1.0;
  const auto log = simulate(m, t, c);
  ASSERT_EQ(log.slots.size(), 1u);
  EXPECT_NEAR(log.end_s, 0.030 + 0.5 + 2.0, 1e-12);
  EXPECT_NEAR(log.startup_delay_s, 0.530, 1e-12);
  EXPECT_EQ(log.mid_stream_rebuffer_s(), 0.0);
  EXPECT_TRUE(log.complete());
}

// High -> low -> high bandwidth on the 99 s example video: the bitrate walks
// down the ladder in the low window and back up, and the buffer respects the
// bound implied by V.
TEST(Simulate, ExampleSessionFollowsBandwidth) {
  const auto m = example_video(33);
  const NetworkTrace t({{30.0, 5000.0, 0.0}, {30.0, 700.0, 0.0}, {200.0, 5000.0, 0.0}}, false);
  PlayerConfig c;
  c.variant = Variant::Basic;
  c.v = 0.93;
  const auto log = simulate(m, t, c);
  check_accounting(log, m);
  const double bound = 0.93 * (m.top_utility() + 5.0) + 1.0;
  double lowest_in_window = 0, highest_before = 4, highest_after = 4;
  for (const auto& s : log.slots) {
    EXPECT_LE(s.buffer_end_chunks, bound + 1e-9);
    EXPECT_LE(s.buffer_end_chunks * 3.0, 25.04);
    if (s.kind != SlotKind::Download) continue;
    if (s.start_s >= 35.0 && s.start_s < 60.0) lowest_in_window = std::max<double>(lowest_in_window, s.level);
    if (s.start_s < 30.0) highest_before = std::min<double>(highest_before, s.level);
    if (s.start_s >= 70.0) highest_after = std::min<double>(highest_after, s.level);
  }
  EXPECT_LE(highest_before, 1.0);
  EXPECT_GE(lowest_in_window, 3.0);
  EXPECT_LE(highest_after, 1.0);
  EXPECT_NEAR(log.utility_sum, [&] {
    double u = 0.0;
    for (auto l : log.levels()) u += m.utility(l);
    return u;
  }(), 1e-9);
}

TEST(Simulate, AccountingHoldsOnRandomTraces) {
  std::mt19937_64 rng(2024);
  const auto base = gen_vbr_manifest(40, 3.0, reference_ladder_stats(), 4);
  for (int trial = 0; trial < 60; ++trial) {
    const auto t = random_trace(rng, true);
    for (auto v : {Variant::Basic, Variant::Finite, Variant::Oscillation, Variant::Utility}) {
      PlayerConfig c;
      c.variant = v;
      c.buffer_chunks = 3.0 + static_cast<double>(rng() % 30);
      SCOPED_TRACE("trial " + std::to_string(trial) + " " + std::string(to_string(v)));
      check_accounting(simulate(base, t, c), base);
    }
  }
}

TEST(Simulate, DeterministicLogs) {
  const auto m = gen_vbr_manifest(60, 3.0, reference_ladder_stats(), 8);
  const auto t = gen_profile(4);
  PlayerConfig c;
  c.variant = Variant::Oscillation;
  c.buffer_chunks = 25.0 / 3.0;
  const auto a = simulate(m, t, c), b = simulate(m, t, c);
  ASSERT_EQ(a.slots.size(), b.slots.size());
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    EXPECT_EQ(a.slots[k].start_s, b.slots[k].start_s);
    EXPECT_EQ(a.slots[k].level, b.slots[k].level);
    EXPECT_EQ(a.slots[k].buffer_end_chunks, b.slots[k].buffer_end_chunks);
  }
  EXPECT_EQ(a.end_s, b.end_s);
}

TEST(Simulate, FiniteDoesNotRebufferOnProfileOne) {
  const auto m = gen_vbr_manifest(200, 3.0, reference_ladder_stats(), 42);
  PlayerConfig c;
  c.variant = Variant::Finite;
  c.buffer_chunks = 25.0 / 3.0;
  const auto log = simulate(m, gen_profile(1), c);
  EXPECT_EQ(log.mid_stream_rebuffer_s(), 0.0);
}

TEST(Simulate, AbandonsOnBandwidthCollapse) {
  const auto m = example_video(20);
  // Fast enough to climb to the top level, then a collapse.
  const NetworkTrace t({{40.0, 20000.0, 0.0}, {500.0, 400.0, 0.0}}, false);
  PlayerConfig c;
  c.variant = Variant::Finite;
  c.buffer_chunks = 25.0 / 3.0;
  const auto with = simulate(m, t, c);
  std::size_t abandoned = 0;
  for (const auto& s : with.slots)
    if (s.abandoned) {
      ++abandoned;
      EXPECT_GT(s.abandoned->wasted_bits, 0.0);
      EXPECT_LT(s.abandoned->level, s.level);
    }
  EXPECT_GT(abandoned, 0u);
  check_accounting(with, m);

  c.abandonment = false;
  const auto without = simulate(m, t, c);
  for (const auto& s : without.slots) EXPECT_FALSE(s.abandoned);
  EXPECT_LT(with.rebuffer_s, without.rebuffer_s);

  c.abandonment = true;
  c.max_abandonments_per_chunk = 0;
  for (const auto& s : simulate(m, t, c).slots) EXPECT_FALSE(s.abandoned);
}

TEST(Simulate, OscillationVariantPauses) {
  const auto m = constant_manifest(100, 3.0, {6.0, 5.027, 2.962, 2.056, 1.427, 0.991, 0.688, 0.477, 0.331, 0.230});
  const NetworkTrace t({{1000.0, 2000.0, 0.0}}, true);
  PlayerConfig c;
  c.variant = Variant::Oscillation;
  c.buffer_chunks = 25.0 / 3.0;
  const auto log = simulate(m, t, c);
  bool paused = false;
  for (const auto& s : log.slots) paused = paused || s.kind == SlotKind::Pause;
  EXPECT_TRUE(paused);
  check_accounting(log, m);
}

TEST(Simulate, ExhaustedTraceNamesTheChunk) {
  const auto m = example_video(10);
  const NetworkTrace t({{5.0, 1000.0, 0.0}}, false);
  PlayerConfig c;
  c.v = 0.93;
  try {
    simulate(m, t, c);
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_NE(std::string(e.what()).find("chunk "), std::string::npos);
  }
}

TEST(Simulate, BasicWarnsWhenVExceedsBufferBound) {
  const auto m = example_video(5);
  const NetworkTrace t({{1000.0, 5000.0, 0.0}}, false);
  PlayerConfig c;
  c.v = 2.0;
  c.buffer_chunks = 5.0;
  EXPECT_EQ(simulate(m, t, c).warnings.size(), 1u);
  c.v.reset();
  EXPECT_TRUE(simulate(m, t, c).warnings.empty());
}

// BASIC never holds more than Q_max or V (u_1 + gamma_p) + 1 chunks at slot
// boundaries, on assorted traces.
TEST(Simulate, BasicBufferBound) {
  std::mt19937_64 rng(99);
  const auto m = gen_vbr_manifest(80, 3.0, reference_ladder_stats(), 1);
  for (int trial = 0; trial < 40; ++trial) {
    const auto t = random_trace(rng, true);
    PlayerConfig c;
    c.buffer_chunks = 4.0 + static_cast<double>(trial % 20);
    const auto log = simulate(m, t, c);
    const double bound = log.v * (m.top_utility() + c.gamma_p) + 1.0;
    for (const auto& s : log.slots) {
      EXPECT_LE(s.buffer_end_chunks, *c.buffer_chunks + 1e-9);
      EXPECT_LE(s.buffer_end_chunks, bound + 1e-9);
    }
  }
}
