#pragma once

// Trace and manifest sources: the twelve DASH-IF network profiles, trace
// files, and seeded synthetic VBR ladders.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bola/error.hpp"
#include "bola/model.hpp"
#include "bola/trace.hpp"

namespace bola {

inline constexpr double kProfileStageSeconds = 30.0;

struct ProfileStage {
  double mbps;
  double latency_ms;
};

// Stage lists of the odd-numbered profiles, starting at the high stage.
inline std::vector<ProfileStage> odd_profile_stages(int id) {
  switch (id) {
    case 1: return {{5.0, 38}, {4.0, 50}, {3.0, 75}, {2.0, 88}, {1.5, 100}, {2.0, 88}, {3.0, 75}, {4.0, 50}};
    case 3: return {{5.0, 13}, {4.0, 18}, {3.0, 28}, {2.0, 58}, {1.5, 200}, {2.0, 58}, {3.0, 28}, {4.0, 18}};
    case 5: return {{5.0, 11}, {4.0, 13}, {3.0, 15}, {2.0, 20}, {1.5, 25}, {2.0, 20}, {3.0, 15}, {4.0, 13}};
    case 7: return {{9.0, 25}, {4.0, 50}, {2.0, 75}, {1.0, 100}, {2.0, 75}, {4.0, 50}};
    case 9: return {{9.0, 10}, {4.0, 50}, {2.0, 150}, {1.0, 200}, {2.0, 150}, {4.0, 50}};
    case 11: return {{9.0, 6}, {4.0, 13}, {2.0, 20}, {1.0, 25}, {2.0, 20}, {4.0, 13}};
    default: throw ParameterError("no odd profile " + std::to_string(id));
  }
}

// Even ids repeat the preceding odd profile rotated to start at its
// minimum-bandwidth stage.
inline std::vector<ProfileStage> profile_stages(int id) {
  if (id < 1 || id > 12) throw ParameterError("profile id must be in 1..12, got " + std::to_string(id));
  auto stages = odd_profile_stages(id % 2 == 1 ? id : id - 1);
  if (id % 2 == 0) {
    auto low = std::min_element(stages.begin(), stages.end(),
                                [](const ProfileStage& a, const ProfileStage& b) { return a.mbps < b.mbps; });
    std::rotate(stages.begin(), low, stages.end());
  }
  return stages;
}

inline NetworkTrace gen_profile(int id) {
  std::vector<TraceSegment> segments;
  for (const auto& s : profile_stages(id)) segments.push_back({kProfileStageSeconds, s.mbps * 1000.0, s.latency_ms});
  return NetworkTrace(std::move(segments), true);
}

struct TraceLoadOptions {
  double default_latency_ms = 50.0;
  bool cyclic = false;  // a "# cyclic" line in the file also turns this on
  std::optional<double> minimum_bitrate_bps;  // warn when the average is lower
};

struct LoadedTrace {
  NetworkTrace trace;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    auto pos = s.find(sep);
    out.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Shortest text that reads back as exactly the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

// Rows are `duration_s,bandwidth_kbps[,latency_ms]`; an optional header
// line and `#` comments are allowed.
inline LoadedTrace parse_trace(std::istream& in, const TraceLoadOptions& options = {}) {
  std::vector<TraceSegment> segments;
  bool cyclic = options.cyclic;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      auto body = detail::trim(text.substr(1));
      if (body == "cyclic") cyclic = true;
      continue;
    }
    const auto fields = detail::split(text, ',');
    if (!header_seen && segments.empty() && fields[0] == "duration_s") {
      header_seen = true;
      continue;
    }
    if (fields.size() < 2 || fields.size() > 3)
      throw ParseError("expected 2 or 3 comma-separated fields, got " + std::to_string(fields.size()), line_no);
    TraceSegment seg;
    if (!detail::parse_double(fields[0], seg.duration_s) || !(seg.duration_s > 0.0))
      throw ParseError("bad duration '" + std::string(fields[0]) + "'", line_no);
    if (!detail::parse_double(fields[1], seg.bandwidth_kbps) || seg.bandwidth_kbps < 0.0)
      throw ParseError("bad bandwidth '" + std::string(fields[1]) + "'", line_no);
    seg.latency_ms = options.default_latency_ms;
    if (fields.size() == 3 && (!detail::parse_double(fields[2], seg.latency_ms) || seg.latency_ms < 0.0))
      throw ParseError("bad latency '" + std::string(fields[2]) + "'", line_no);
    segments.push_back(seg);
  }
  if (segments.empty()) throw ParseError("trace has no data rows");
  LoadedTrace out;
  try {
    out.trace = NetworkTrace(std::move(segments), cyclic);
  } catch (const ParameterError& e) {
    throw ParseError(e.what());
  }
  if (options.minimum_bitrate_bps && out.trace.average_bandwidth_bps() < *options.minimum_bitrate_bps)
    out.warnings.push_back("average bandwidth " + std::to_string(out.trace.average_bandwidth_bps() / 1000.0) +
                           " kbps is below the lowest bitrate " +
                           std::to_string(*options.minimum_bitrate_bps / 1000.0) + " kbps");
  return out;
}

inline LoadedTrace load_trace(const std::string& path, const TraceLoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file '" + path + "'");
  return parse_trace(in, options);
}

inline void write_trace(std::ostream& out, const NetworkTrace& trace) {
  if (trace.cyclic()) out << "# cyclic\n";
  out << "duration_s,bandwidth_kbps,latency_ms\n";
  for (const auto& s : trace.segments())
    out << detail::format_double(s.duration_s) << ',' << detail::format_double(s.bandwidth_kbps) << ','
        << detail::format_double(s.latency_ms) << '\n';
}

inline void save_trace(const std::string& path, const NetworkTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file '" + path + "'");
  write_trace(out, trace);
  if (!out) throw Error("failed writing trace file '" + path + "'");
}

struct LevelStats {
  double nominal_mbps;
  double mean_size_mb;
  double std_size_mb;
};

// Chunk-size statistics of the ten-level 3 s ladder used in the DASH
// evaluations (highest bitrate first).
inline std::vector<LevelStats> reference_ladder_stats() {
  return {{6.000, 18.00, 3.232}, {5.027, 15.08, 2.673}, {2.962, 8.886, 1.691}, {2.056, 6.168, 1.182},
          {1.427, 4.281, 0.825}, {0.991, 2.973, 0.545}, {0.688, 2.064, 0.360}, {0.477, 1.431, 0.287},
          {0.331, 0.993, 0.162}, {0.230, 0.690, 0.113}};
}

namespace detail {

// Portable uniform in [0, 1) from a 64-bit engine; the standard
// distributions are not reproducible across library implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& rng) {
  double u1 = 0.0;
  do u1 = unit_uniform(rng);
  while (u1 <= 0.0);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

// Per-chunk sizes: one standard-normal draw per chunk (redrawn outside
// +-3), centred over the video and shared by every level, scaled by each
// level's std, floored at 10% of the mean; each chunk's column is then sorted
// so sizes stay non-increasing in level. Utilities are log utilities.
inline VideoManifest gen_vbr_manifest(std::size_t chunks, double chunk_duration_s, const std::vector<LevelStats>& stats,
                                      std::uint64_t seed) {
  if (chunks == 0) throw ParameterError("need at least one chunk");
  if (!(chunk_duration_s > 0.0)) throw ParameterError("chunk duration must be positive");
  if (stats.empty()) throw InvalidManifest("no ladder statistics");
  for (std::size_t m = 0; m < stats.size(); ++m) {
    if (!(stats[m].mean_size_mb > 0.0) || stats[m].std_size_mb < 0.0 || !(stats[m].nominal_mbps > 0.0))
      throw InvalidManifest("level " + std::to_string(m + 1) + " has invalid statistics");
    if (m > 0 && stats[m].mean_size_mb > stats[m - 1].mean_size_mb)
      throw InvalidManifest("ladder means must be non-increasing");
  }
  std::mt19937_64 rng(seed);
  std::vector<double> z(chunks);
  for (auto& v : z) {
    do v = detail::standard_normal(rng);
    while (std::abs(v) > 3.0);
  }
  if (chunks > 1) {
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(chunks);
    for (auto& v : z) v -= mean;
  } else {
    z[0] = 0.0;
  }

  VideoManifest manifest;
  manifest.chunk_duration_s = chunk_duration_s;
  manifest.levels.resize(stats.size());
  for (std::size_t m = 0; m < stats.size(); ++m) {
    auto& level = manifest.levels[m];
    level.nominal_kbps = stats[m].nominal_mbps * 1000.0;
    level.chunk_sizes_bits.resize(chunks);
    const double mean = stats[m].mean_size_mb * 1e6;
    const double sd = stats[m].std_size_mb * 1e6;
    for (std::size_t n = 0; n < chunks; ++n)
      level.chunk_sizes_bits[n] = std::max(mean + sd * z[n], 0.1 * mean);
  }
  std::vector<double> column(stats.size());
  for (std::size_t n = 0; n < chunks; ++n) {
    for (std::size_t m = 0; m < stats.size(); ++m) column[m] = manifest.levels[m].chunk_sizes_bits[n];
    std::sort(column.begin(), column.end(), std::greater<>());
    for (std::size_t m = 0; m < stats.size(); ++m) manifest.levels[m].chunk_sizes_bits[n] = column[m];
  }
  return log_utilities(std::move(manifest));
}

// Constant-size ladder (every chunk at the level mean) from nominal bitrates.
inline VideoManifest constant_manifest(std::size_t chunks, double chunk_duration_s, const std::vector<double>& mbps) {
  std::vector<LevelStats> stats;
  for (double r : mbps) stats.push_back({r, r * chunk_duration_s, 0.0});
  return gen_vbr_manifest(chunks, chunk_duration_s, stats, 0);
}

}  // namespace bola
