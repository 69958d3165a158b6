#pragma once

// Domain types shared by the policy, simulator, oracle and metrics code.
//
// Conventions used throughout the library:
//   * level indices are 0-based and level 0 is the HIGHEST bitrate, so
//     sizes and utilities are non-increasing in the index;
//   * buffer occupancy is measured in chunks internally and reported in
//     seconds (chunks * chunk duration) at the edges;
//   * gamma is carried as the product gamma*p ("gamma_p"); the per-second
//     weight is gamma_p / p.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bola/error.hpp"

namespace bola {

struct BitrateLevel {
  double nominal_kbps = 0.0;  // kept in file units so manifests round-trip exactly
  double utility = 0.0;
  std::vector<double> chunk_sizes_bits;  // one entry per chunk (VBR)

  double nominal_bitrate_bps() const { return nominal_kbps * 1000.0; }
  double nominal_mbps() const { return nominal_kbps / 1000.0; }

  double mean_chunk_size_bits() const {
    if (chunk_sizes_bits.empty()) return 0.0;
    return std::accumulate(chunk_sizes_bits.begin(), chunk_sizes_bits.end(), 0.0) /
           static_cast<double>(chunk_sizes_bits.size());
  }
};

struct VideoManifest {
  double chunk_duration_s = 0.0;
  std::vector<BitrateLevel> levels;

  std::size_t chunk_count() const { return levels.empty() ? 0 : levels.front().chunk_sizes_bits.size(); }
  std::size_t level_count() const { return levels.size(); }

  double size_bits(std::size_t level, std::size_t chunk) const { return levels[level].chunk_sizes_bits[chunk]; }
  double utility(std::size_t level) const { return levels[level].utility; }
  double top_utility() const { return levels.front().utility; }
  std::size_t lowest_level() const { return levels.size() - 1; }
  double duration_s() const { return static_cast<double>(chunk_count()) * chunk_duration_s; }

  std::vector<double> chunk_sizes(std::size_t chunk) const {
    std::vector<double> out(levels.size());
    for (std::size_t m = 0; m < levels.size(); ++m) out[m] = levels[m].chunk_sizes_bits[chunk];
    return out;
  }
  std::vector<double> mean_sizes() const {
    std::vector<double> out(levels.size());
    for (std::size_t m = 0; m < levels.size(); ++m) out[m] = levels[m].mean_chunk_size_bits();
    return out;
  }
  std::vector<double> utilities() const {
    std::vector<double> out(levels.size());
    for (std::size_t m = 0; m < levels.size(); ++m) out[m] = levels[m].utility;
    return out;
  }
};

// Throws InvalidManifest describing the first violated invariant.
inline void validate(const VideoManifest& manifest) {
  if (!(manifest.chunk_duration_s > 0.0)) throw InvalidManifest("chunk duration must be positive");
  if (manifest.levels.empty()) throw InvalidManifest("manifest has no bitrate levels");
  const std::size_t n = manifest.chunk_count();
  if (n == 0) throw InvalidManifest("manifest has no chunks");
  for (std::size_t m = 0; m < manifest.levels.size(); ++m) {
    const auto& level = manifest.levels[m];
    if (level.chunk_sizes_bits.size() != n)
      throw InvalidManifest("level " + std::to_string(m + 1) + " has " +
                            std::to_string(level.chunk_sizes_bits.size()) + " chunk sizes, expected " +
                            std::to_string(n));
    for (std::size_t c = 0; c < n; ++c) {
      if (!(level.chunk_sizes_bits[c] > 0.0) || !std::isfinite(level.chunk_sizes_bits[c]))
        throw InvalidManifest("level " + std::to_string(m + 1) + " chunk " + std::to_string(c + 1) +
                              " has non-positive size");
      if (m > 0 && level.chunk_sizes_bits[c] > manifest.levels[m - 1].chunk_sizes_bits[c])
        throw InvalidManifest("chunk " + std::to_string(c + 1) + ": size increases from level " +
                              std::to_string(m) + " to level " + std::to_string(m + 1));
    }
    if (m > 0 && level.utility > manifest.levels[m - 1].utility)
      throw InvalidManifest("utilities must be non-increasing in level index");
    if (!std::isfinite(level.utility)) throw InvalidManifest("non-finite utility");
  }
}

// Sets utility_m = ln(mean_m / mean_lowest). The lowest level gets exactly 0.
inline VideoManifest log_utilities(VideoManifest manifest) {
  if (manifest.levels.empty()) throw InvalidManifest("manifest has no bitrate levels");
  const auto means = manifest.mean_sizes();
  for (double s : means)
    if (!(s > 0.0)) throw InvalidManifest("log utilities need positive mean chunk sizes");
  const double lowest = means.back();
  for (std::size_t m = 0; m < means.size(); ++m) manifest.levels[m].utility = std::log(means[m] / lowest);
  manifest.levels.back().utility = 0.0;
  return manifest;
}

// Largest V that keeps the buffer within buffer_chunks: (Q_max - 1) / (v_1 + gamma_p).
inline double derive_v(double buffer_chunks, double top_utility, double gamma_p) {
  if (!(buffer_chunks > 1.0)) throw ParameterError("buffer must hold more than one chunk to derive V");
  if (!(top_utility + gamma_p > 0.0)) throw ParameterError("top utility + gamma_p must be positive");
  return (buffer_chunks - 1.0) / (top_utility + gamma_p);
}

struct GammaV {
  double gamma_p = 0.0;
  double v = 0.0;
};

// Picks (gamma_p, V) so that the lowest level stops being the decision below
// safe_buffer_s and downloads stop once the buffer would exceed max_buffer_s.
//
// Level M (lowest) and a higher level m tie where
//   Q = V * (gamma_p + c_m),  c_m = (S_m u_M - S_M u_m) / (S_m - S_M)
// using mean sizes. The lowest level loses the argmax at the smallest such
// crossing, c = min_m c_m (for the usual concave ladders this is m = M-1).
// Combined with V = (Q_max - 1) / (u_1 + gamma_p) and Q_safe = safe/p:
//   gamma_p = ((Q_max - 1) c - Q_safe u_1) / (Q_safe - Q_max + 1).
inline GammaV derive_gamma_v(double safe_buffer_s, double max_buffer_s, const VideoManifest& manifest) {
  if (!(safe_buffer_s > 0.0 && safe_buffer_s < max_buffer_s))
    throw ParameterError("need 0 < safe buffer < max buffer");
  if (manifest.level_count() < 2) throw ParameterError("need at least two bitrate levels");
  const double p = manifest.chunk_duration_s;
  const auto sizes = manifest.mean_sizes();
  const auto utils = manifest.utilities();
  const std::size_t last = sizes.size() - 1;
  std::optional<double> c;
  for (std::size_t m = 0; m < last; ++m) {
    const double gap = sizes[m] - sizes[last];
    if (!(gap > 0.0)) continue;  // identical sizes never cross
    const double cm = (sizes[m] * utils[last] - sizes[last] * utils[m]) / gap;
    if (!c || cm < *c) c = cm;
  }
  if (!c) throw ParameterError("no level ever overtakes the lowest level (equal sizes)");
  const double q_safe = safe_buffer_s / p;
  const double q_max = max_buffer_s / p;
  const double denom = q_safe - q_max + 1.0;
  if (denom == 0.0) throw ParameterError("safe and max buffer leave no solution for gamma");
  const double gamma_p = ((q_max - 1.0) * *c - q_safe * utils.front()) / denom;
  if (!(gamma_p > 0.0) || !std::isfinite(gamma_p))
    throw ParameterError("no positive gamma_p satisfies both buffer constraints");
  const double v = derive_v(q_max, utils.front(), gamma_p);
  if (!(v > 0.0)) throw ParameterError("derived V is not positive");
  return {gamma_p, v};
}

enum class Variant { Basic, Finite, Oscillation, Utility };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Basic: return "bola-basic";
    case Variant::Finite: return "bola-finite";
    case Variant::Oscillation: return "bola-o";
    case Variant::Utility: return "bola-u";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "bola-basic" || s == "basic") return Variant::Basic;
  if (s == "bola-finite" || s == "finite") return Variant::Finite;
  if (s == "bola-o" || s == "o") return Variant::Oscillation;
  if (s == "bola-u" || s == "u") return Variant::Utility;
  throw ParameterError("unknown variant '" + std::string(s) + "'");
}

struct PlayerConfig {
  double gamma_p = 5.0;
  std::optional<double> v;              // control parameter; derived from buffer_chunks when absent
  std::optional<double> buffer_chunks;  // Q_max
  Variant variant = Variant::Basic;
  std::optional<bool> abandonment;      // default: on for FINITE/O/U, off for BASIC
  double abandonment_tick_s = 0.25;
  // Each restart moves to a strictly lower level, so a chunk restarts at most
  // M-1 times even without a cap.
  std::optional<std::size_t> max_abandonments_per_chunk;
  double minimum_buffer_chunks = 3.0;

  bool abandonment_enabled() const { return abandonment.value_or(variant != Variant::Basic); }
};

// The (V, Q_max) pair a session actually runs with, plus any precondition warning.
struct ResolvedParameters {
  double v = 0.0;
  double buffer_chunks = 0.0;
  std::optional<std::string> warning;
};

inline ResolvedParameters resolve(const PlayerConfig& config, double top_utility) {
  if (!(config.gamma_p > 0.0)) throw ParameterError("gamma_p must be positive");
  if (!config.v && !config.buffer_chunks) throw ParameterError("need either V or a buffer size");
  if (!(config.abandonment_tick_s > 0.0)) throw ParameterError("abandonment tick must be positive");
  ResolvedParameters out;
  const double scale = top_utility + config.gamma_p;
  if (config.buffer_chunks) {
    out.buffer_chunks = *config.buffer_chunks;
    out.v = config.v ? *config.v : derive_v(out.buffer_chunks, top_utility, config.gamma_p);
  } else {
    out.v = *config.v;
    out.buffer_chunks = out.v * scale + 1.0;
  }
  if (!(out.v > 0.0)) throw ParameterError("V must be positive");
  if (!(out.buffer_chunks > 1.0)) throw ParameterError("buffer must hold more than one chunk");
  const double v_limit = (out.buffer_chunks - 1.0) / scale;
  if (out.v > v_limit * (1.0 + 1e-12))
    out.warning = "V = " + std::to_string(out.v) + " exceeds (Q_max - 1)/(v_1 + gamma_p) = " +
                  std::to_string(v_limit) + "; buffer bound not guaranteed";
  return out;
}

struct BufferState {
  double level_chunks = 0.0;
  double playhead_s = 0.0;
  std::size_t next_chunk = 0;
};

// Manifest covering duration_s of video by cycling the original chunks.
inline VideoManifest repeat_to_length(const VideoManifest& manifest, double duration_s) {
  const std::size_t original = manifest.chunk_count();
  if (original == 0) throw InvalidManifest("manifest has no chunks");
  const auto target = static_cast<std::size_t>(std::ceil(duration_s / manifest.chunk_duration_s - 1e-9));
  if (target == 0) throw ParameterError("video length must cover at least one chunk");
  VideoManifest out = manifest;
  for (auto& level : out.levels) {
    const auto& src = level.chunk_sizes_bits;
    std::vector<double> sizes(target);
    for (std::size_t n = 0; n < target; ++n) sizes[n] = src[n % original];
    level.chunk_sizes_bits = std::move(sizes);
  }
  return out;
}

}  // namespace bola
