#pragma once

// Decision rules for the BOLA family. Everything here is a pure function of
// its arguments; the simulator owns all state.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "bola/model.hpp"

namespace bola {

struct Download {
  std::size_t level = 0;
  friend bool operator==(const Download&, const Download&) = default;
};

// Wait (buffer drains at 1/p chunks/s) until the buffer is at or below the threshold.
struct SleepUntilBufferBelow {
  double threshold_chunks = 0.0;
  friend bool operator==(const SleepUntilBufferBelow&, const SleepUntilBufferBelow&) = default;
};

struct PauseFor {
  double duration_s = 0.0;
  std::size_t level = 0;  // downloaded once the pause ends
  friend bool operator==(const PauseFor&, const PauseFor&) = default;
};

using Decision = std::variant<Download, SleepUntilBufferBelow, PauseFor>;

struct PolicyState {
  std::optional<std::size_t> previous_level;
  std::optional<double> measured_bandwidth_bps;
};

// (V u_m + V gamma_p - Q) / S_m
inline double score(double utility, double buffer_chunks, double v, double gamma_p, double size_bits) {
  return (v * utility + v * gamma_p - buffer_chunks) / size_bits;
}

// Argmax of the score over all levels, regardless of sign. Ties go to the
// smallest index (highest bitrate).
inline std::size_t best_level(double buffer_chunks, double v, double gamma_p, std::span<const double> utilities,
                              std::span<const double> sizes) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    const double s = score(utilities[m], buffer_chunks, v, gamma_p, sizes[m]);
    if (s > best_score) {
      best_score = s;
      best = m;
    }
  }
  return best;
}

// V (u_1 + gamma_p): at or above this buffer level no score is positive.
inline double download_cutoff(double v, double gamma_p, double top_utility) { return v * (top_utility + gamma_p); }

inline Decision bola_basic_decide(double buffer_chunks, double v, double gamma_p, const VideoManifest& manifest,
                                  std::size_t chunk) {
  const double cutoff = download_cutoff(v, gamma_p, manifest.top_utility());
  if (buffer_chunks >= cutoff) return SleepUntilBufferBelow{cutoff};
  const auto utils = manifest.utilities();
  const auto sizes = manifest.chunk_sizes(chunk);
  return Download{best_level(buffer_chunks, v, gamma_p, utils, sizes)};
}

// Step-function boundaries of bola_basic_decide over the buffer axis, using
// one size per level (typically the mean). The result b has M+1 entries:
// level m is chosen on [b[m+1], b[m]) and b[0] is the no-download cutoff.
// Levels that are never chosen get b[m+1] == b[m].
inline std::vector<double> decision_thresholds(double v, double gamma_p, std::span<const double> sizes,
                                               std::span<const double> utilities) {
  const std::size_t levels = sizes.size();
  if (levels == 0 || utilities.size() != levels) throw ParameterError("sizes and utilities must match");
  for (std::size_t m = 1; m < levels; ++m)
    if (sizes[m] > sizes[m - 1] || utilities[m] > utilities[m - 1])
      throw ParameterError("levels must be ordered by non-increasing size and utility");
  const double cutoff = download_cutoff(v, gamma_p, utilities[0]);
  std::vector<double> b(levels + 1, cutoff);
  auto intercept = [&](std::size_t m) { return v * (utilities[m] + gamma_p); };

  // Walk the upper envelope of the score lines from Q = 0 upwards.
  double q = 0.0;
  std::size_t current = best_level(0.0, v, gamma_p, utilities, sizes);
  for (std::size_t m = current + 1; m <= levels; ++m) b[m] = 0.0;
  if (cutoff <= 0.0) {
    std::fill(b.begin(), b.end(), cutoff);
    return b;
  }
  while (true) {
    // Next line to overtake the current one: a larger-size level whose
    // score crosses above at the smallest buffer level past q.
    std::optional<std::size_t> next;
    double next_q = cutoff;
    for (std::size_t m = 0; m < current; ++m) {
      const double denom = sizes[current] - sizes[m];
      if (!(denom < 0.0)) continue;
      const double cross = (sizes[current] * intercept(m) - sizes[m] * intercept(current)) / denom;
      if (cross < q) continue;
      if (cross < next_q || (cross == next_q && next && m < *next)) {
        next_q = cross;
        next = m;
      }
    }
    if (!next || next_q >= cutoff) break;
    for (std::size_t m = *next + 1; m <= current; ++m) b[m] = next_q;
    q = next_q;
    current = *next;
  }
  for (std::size_t m = 0; m <= current; ++m) b[m] = cutoff;
  return b;
}

struct DynamicV {
  double buffer_chunks = 0.0;  // Q_max^D
  double v = 0.0;              // V^D
};

// Shrinks the effective buffer near the start and the end of the video.
inline DynamicV dynamic_v(double playtime_from_begin_s, double playtime_to_end_s, double buffer_chunks,
                          double top_utility, double gamma_p, double chunk_duration_s,
                          double minimum_buffer_chunks = 3.0) {
  const double t = std::min(playtime_from_begin_s, playtime_to_end_s);
  const double t_prime = std::max(t / 2.0, minimum_buffer_chunks * chunk_duration_s);
  const double q_max_d = std::min(buffer_chunks, t_prime / chunk_duration_s);
  return {q_max_d, (q_max_d - 1.0) / (top_utility + gamma_p)};
}

// Smallest index whose bitrate is sustainable at the measured bandwidth
// (never worse than the lowest level).
inline std::size_t sustainable_level(double bandwidth_bps, std::span<const double> sizes, double chunk_duration_s) {
  const double limit = std::max(bandwidth_bps, sizes.back() / chunk_duration_s);
  for (std::size_t m = 0; m < sizes.size(); ++m)
    if (sizes[m] / chunk_duration_s <= limit) return m;
  return sizes.size() - 1;
}

// Buffer level at which level `lower` (smaller) and `upper = lower - 1`
// score equally; below it `lower` scores at least as well.
inline double crossing_level(std::size_t lower, double v, double gamma_p, std::span<const double> utilities,
                             std::span<const double> sizes) {
  const std::size_t upper = lower - 1;
  const double a_low = v * (utilities[lower] + gamma_p);
  const double a_up = v * (utilities[upper] + gamma_p);
  const double denom = sizes[lower] - sizes[upper];
  if (denom == 0.0) return a_low >= a_up ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return (sizes[lower] * a_up - sizes[upper] * a_low) / denom;
}

// Caps an up-switch (new_level < previous_level) using the bandwidth measured
// on the previous download. FINITE and BASIC leave the choice untouched.
inline Decision oscillation_guard(std::size_t new_level, std::size_t previous_level, double measured_bps,
                                  std::span<const double> sizes, std::span<const double> utilities, Variant variant,
                                  double v, double gamma_p, double buffer_chunks, double chunk_duration_s) {
  if (variant == Variant::Basic || variant == Variant::Finite || new_level >= previous_level)
    return Download{new_level};
  const std::size_t sustainable = sustainable_level(measured_bps, sizes, chunk_duration_s);
  if (sustainable <= new_level) return Download{new_level};
  if (sustainable > previous_level) return Download{previous_level};
  if (variant == Variant::Utility) return Download{sustainable - 1};
  // BOLA-O: let the buffer slip to where `sustainable` outscores the level above it.
  const double target = crossing_level(sustainable, v, gamma_p, utilities, sizes);
  double drain_chunks = buffer_chunks - target;
  if (!(drain_chunks > 0.0)) drain_chunks = 0.0;
  drain_chunks = std::min(drain_chunks, buffer_chunks);
  return PauseFor{drain_chunks * chunk_duration_s, sustainable};
}

// Abandonment test for a download of `level` with remaining_bits left.
// Returns the lower level to restart at, or nothing. Only candidates with a
// positive score are eligible.
inline std::optional<std::size_t> shall_abandon(std::size_t level, double remaining_bits, double buffer_chunks,
                                                double v, double gamma_p, std::span<const double> sizes,
                                                std::span<const double> utilities) {
  if (!(remaining_bits > 0.0)) return std::nullopt;
  const double current = score(utilities[level], buffer_chunks, v, gamma_p, remaining_bits);
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t m = level + 1; m < sizes.size(); ++m) {
    const double s = score(utilities[m], buffer_chunks, v, gamma_p, sizes[m]);
    if (s > best_score) {
      best_score = s;
      best = m;
    }
  }
  if (best && best_score > current) return best;
  return std::nullopt;
}

}  // namespace bola
