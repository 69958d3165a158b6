#pragma once

// Offline upper bound on the time-average utility any player can reach on a
// known trace, by dynamic programming over (finish time, buffer) on a
// delta-grid, plus an exhaustive continuous-time verifier for tiny inputs.
//
// Both use the same player model. Chunk n is requested the moment chunk n-1
// finishes; if the buffer could not hold it, completion is pushed back until
// it fits:
//   x' = max(x, b + p - b_max),  y = max(x' - b, 0)
//   t <- t + x',                 b <- b - x' + y + p
// and the score of a path is (sum utility - gamma * sum y) / (t + b).
// Download times are rounded down on the grid, so the DP never undershoots
// the exact optimum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bola/error.hpp"
#include "bola/model.hpp"
#include "bola/trace.hpp"

namespace bola {

struct OracleOptions {
  double delta_s = 0.1;
  double buffer_cap_s = 0.0;        // b_max; must be set
  bool credit_chunk_duration = true;  // b gains p when a chunk lands
  std::size_t max_states = 40'000'000;  // per-layer grid cells
};

struct OracleStep {
  std::size_t level = 0;
  double finish_s = 0.0;
  double buffer_s = 0.0;
  double rebuffer_s = 0.0;
};

struct OracleResult {
  double best_ratio = -std::numeric_limits<double>::infinity();  // r*
  std::vector<OracleStep> path;
  double utility_sum = 0.0;
  double rebuffer_s = 0.0;
  double end_s = 0.0;
  std::size_t states = 0;  // reachable states kept across all layers
};

namespace detail {

inline std::int64_t grid_units(double value, double delta, const char* what) {
  const double units = value / delta;
  const double rounded = std::round(units);
  if (std::abs(units - rounded) > 1e-6 * std::max(1.0, rounded))
    throw ParameterError(std::string(what) + " is not an integer multiple of delta");
  return static_cast<std::int64_t>(rounded);
}

// Download time of `bits` requested at grid time t, floored to the grid.
inline std::int64_t grid_download_time(const NetworkTrace& trace, std::int64_t t, double delta, double bits) {
  const double start = static_cast<double>(t) * delta;
  const double x = transfer_time(trace, start, bits) - start;
  return static_cast<std::int64_t>(std::floor(x / delta + 1e-9));
}

struct GridModel {
  const VideoManifest& manifest;
  const NetworkTrace& trace;
  double delta;
  double gamma;  // per second
  std::int64_t chunk_units;
  std::int64_t cap_units;
  bool credit;

  struct Move {
    std::int64_t t;
    std::int64_t b;
    std::int64_t stall;
  };

  Move step(std::int64_t t, std::int64_t b, std::int64_t x) const {
    const std::int64_t x_capped = std::max(x, b + chunk_units - cap_units);
    const std::int64_t y = std::max(x_capped - b, std::int64_t{0});
    return {t + x_capped, b - x_capped + y + (credit ? chunk_units : 0), y};
  }
};

// Score of a simple rule-driven path through the grid model: the best
// level that arrives with `margin` units of buffer to spare (or the lowest
// level), or a fixed level when fixed_level is set.
inline double heuristic_path_ratio(const GridModel& g, std::int64_t margin, std::optional<std::size_t> fixed_level) {
  std::int64_t t = 0, b = 0;
  double r = 0.0;
  const std::size_t levels = g.manifest.level_count();
  for (std::size_t n = 0; n < g.manifest.chunk_count(); ++n) {
    std::size_t pick = levels - 1;
    std::int64_t x = 0;
    if (fixed_level) {
      pick = *fixed_level;
      x = grid_download_time(g.trace, t, g.delta, g.manifest.size_bits(pick, n));
    } else {
      for (std::size_t m = 0; m < levels; ++m) {
        x = grid_download_time(g.trace, t, g.delta, g.manifest.size_bits(m, n));
        pick = m;
        if (x <= b - margin) break;
      }
    }
    const auto mv = g.step(t, b, x);
    r += g.manifest.utility(pick) - g.gamma * static_cast<double>(mv.stall) * g.delta;
    t = mv.t;
    b = mv.b;
  }
  const double denom = static_cast<double>(t + b) * g.delta;
  return denom > 0.0 ? r / denom : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline OracleResult offline_optimal(const VideoManifest& manifest, const NetworkTrace& trace, double gamma_p,
                                    const OracleOptions& options) {
  validate(manifest);
  if (!(options.delta_s > 0.0)) throw ParameterError("delta must be positive");
  if (!(gamma_p > 0.0)) throw ParameterError("gamma_p must be positive");
  const double p = manifest.chunk_duration_s;
  const double delta = options.delta_s;
  const std::int64_t chunk_units = detail::grid_units(p, delta, "chunk duration");
  const std::int64_t cap_units = detail::grid_units(options.buffer_cap_s, delta, "buffer cap");
  if (chunk_units <= 0) throw ParameterError("delta larger than the chunk duration");
  if (cap_units < chunk_units) throw ParameterError("buffer cap must hold at least one chunk");

  const detail::GridModel model{manifest, trace, delta, gamma_p / p, chunk_units, cap_units,
                                options.credit_chunk_duration};
  const std::size_t n_chunks = manifest.chunk_count();
  const std::size_t levels = manifest.level_count();
  const double top_utility = manifest.top_utility();

  // Lower bound from cheap feasible paths; states that cannot beat it are dropped.
  double lower_bound = -std::numeric_limits<double>::infinity();
  for (double margin_chunks : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0})
    lower_bound = std::max(lower_bound, detail::heuristic_path_ratio(
                                            model, static_cast<std::int64_t>(margin_chunks * chunk_units), {}));
  for (std::size_t m = 0; m < levels; ++m)
    lower_bound = std::max(lower_bound, detail::heuristic_path_ratio(model, 0, m));
  const double slack = 1e-9 * std::max(1.0, std::abs(lower_bound));

  struct State {
    std::int32_t t;
    std::int32_t b;
    std::int32_t parent;
    std::uint16_t level;
  };
  std::vector<std::vector<State>> history;  // history[n] = states after n chunks
  history.reserve(n_chunks + 1);
  history.push_back({State{0, 0, -1, 0}});
  std::vector<double> values{0.0};

  const std::int64_t width = cap_units + 1;
  OracleResult result;
  std::vector<std::int64_t> x_cache;
  std::vector<double> grid_value;
  std::vector<std::int32_t> grid_parent;
  std::vector<std::uint16_t> grid_level;

  for (std::size_t n = 0; n < n_chunks; ++n) {
    const auto& layer = history.back();
    std::int64_t t_lo = std::numeric_limits<std::int64_t>::max(), t_hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& s : layer) {
      t_lo = std::min<std::int64_t>(t_lo, s.t);
      t_hi = std::max<std::int64_t>(t_hi, s.t);
    }
    // Download times depend only on (t', level) within a layer.
    const std::int64_t t_span = t_hi - t_lo + 1;
    x_cache.assign(static_cast<std::size_t>(t_span) * levels, -1);
    auto x_of = [&](std::int64_t t, std::size_t m) {
      auto& slot = x_cache[static_cast<std::size_t>(t - t_lo) * levels + m];
      if (slot < 0) slot = detail::grid_download_time(trace, t, delta, manifest.size_bits(m, n));
      return slot;
    };

    std::int64_t nt_lo = std::numeric_limits<std::int64_t>::max(), nt_hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& s : layer)
      for (std::size_t m = 0; m < levels; ++m) {
        const auto mv = model.step(s.t, s.b, x_of(s.t, m));
        nt_lo = std::min(nt_lo, mv.t);
        nt_hi = std::max(nt_hi, mv.t);
      }
    const std::int64_t rows = nt_hi - nt_lo + 1;
    if (static_cast<double>(rows) * static_cast<double>(width) > static_cast<double>(options.max_states))
      throw ResourceError("oracle state space too large at chunk " + std::to_string(n + 1) +
                          "; try a coarser delta (e.g. " + std::to_string(delta * 2.0) + " s)");
    if (nt_hi > std::numeric_limits<std::int32_t>::max() / 2)
      throw ResourceError("oracle time axis overflow; try a coarser delta");
    const auto cells = static_cast<std::size_t>(rows * width);
    grid_value.assign(cells, -std::numeric_limits<double>::infinity());
    grid_parent.assign(cells, -1);
    grid_level.assign(cells, 0);

    for (std::size_t i = 0; i < layer.size(); ++i) {
      const auto& s = layer[i];
      for (std::size_t m = 0; m < levels; ++m) {
        const auto mv = model.step(s.t, s.b, x_of(s.t, m));
        const double r =
            values[i] + manifest.utility(m) - model.gamma * static_cast<double>(mv.stall) * delta;
        const auto cell = static_cast<std::size_t>((mv.t - nt_lo) * width + mv.b);
        if (r > grid_value[cell]) {
          grid_value[cell] = r;
          grid_parent[cell] = static_cast<std::int32_t>(i);
          grid_level[cell] = static_cast<std::uint16_t>(m);
        }
      }
    }

    const std::size_t done = n + 1;
    const double rest_utility = static_cast<double>(n_chunks - done) * top_utility;
    std::vector<State> next;
    std::vector<double> next_values;
    for (std::int64_t row = 0; row < rows; ++row)
      for (std::int64_t b = 0; b < width; ++b) {
        const auto cell = static_cast<std::size_t>(row * width + b);
        const double r = grid_value[cell];
        if (r == -std::numeric_limits<double>::infinity()) continue;
        const std::int64_t t = nt_lo + row;
        // Optimistic finish: top quality for the rest, no further stalls.
        const std::int64_t stalled = t + b - static_cast<std::int64_t>(done) * chunk_units;
        const double denom =
            static_cast<double>(static_cast<std::int64_t>(n_chunks) * chunk_units + std::max<std::int64_t>(stalled, 0)) *
            delta;
        if (model.credit && denom > 0.0) {
          const double bound = std::max((r + rest_utility) / denom, -model.gamma);
          if (bound < lower_bound - slack) continue;
        }
        next.push_back(State{static_cast<std::int32_t>(t), static_cast<std::int32_t>(b), grid_parent[cell],
                             grid_level[cell]});
        next_values.push_back(r);
      }
    if (next.empty()) throw SimulationError("oracle pruned every state; lower bound inconsistent");
    result.states += next.size();
    history.push_back(std::move(next));
    values = std::move(next_values);
  }

  const auto& last = history.back();
  std::size_t best = 0;
  for (std::size_t i = 0; i < last.size(); ++i) {
    const double denom = static_cast<double>(last[i].t + last[i].b) * delta;
    if (!(denom > 0.0)) continue;
    const double ratio = values[i] / denom;
    if (ratio > result.best_ratio) {
      result.best_ratio = ratio;
      best = i;
    }
  }

  result.path.resize(n_chunks);
  std::int32_t index = static_cast<std::int32_t>(best);
  for (std::size_t n = n_chunks; n > 0; --n) {
    const auto& s = history[n][static_cast<std::size_t>(index)];
    const auto& prev = history[n - 1][static_cast<std::size_t>(s.parent)];
    const auto x = detail::grid_download_time(trace, prev.t, delta, manifest.size_bits(s.level, n - 1));
    const auto mv = model.step(prev.t, prev.b, x);
    result.path[n - 1] = OracleStep{s.level, static_cast<double>(s.t) * delta, static_cast<double>(s.b) * delta,
                                    static_cast<double>(mv.stall) * delta};
    index = s.parent;
  }
  for (const auto& step : result.path) {
    result.utility_sum += manifest.utility(step.level);
    result.rebuffer_s += step.rebuffer_s;
  }
  result.end_s = static_cast<double>(last[best].t + last[best].b) * delta;
  return result;
}

// Exact optimum by enumerating all M^N level sequences in continuous time.
inline OracleResult brute_force_optimal(const VideoManifest& manifest, const NetworkTrace& trace, double gamma_p,
                                        double buffer_cap_s, std::size_t max_sequences = 1'000'000) {
  validate(manifest);
  const std::size_t n_chunks = manifest.chunk_count();
  const std::size_t levels = manifest.level_count();
  const double p = manifest.chunk_duration_s;
  if (buffer_cap_s < p) throw ParameterError("buffer cap must hold at least one chunk");
  double sequences = std::pow(static_cast<double>(levels), static_cast<double>(n_chunks));
  if (sequences > static_cast<double>(max_sequences))
    throw ResourceError("brute force needs " + std::to_string(sequences) + " sequences; limit is " +
                        std::to_string(max_sequences));
  const double gamma = gamma_p / p;

  OracleResult best;
  std::vector<OracleStep> path(n_chunks);
  auto walk = [&](auto&& self, std::size_t n, double t, double b, double utility, double stall) -> void {
    if (n == n_chunks) {
      const double ratio = (utility - gamma * stall) / (t + b);
      if (ratio > best.best_ratio) {
        best.best_ratio = ratio;
        best.path = path;
        best.utility_sum = utility;
        best.rebuffer_s = stall;
        best.end_s = t + b;
      }
      return;
    }
    for (std::size_t m = 0; m < levels; ++m) {
      const double x = transfer_time(trace, t, manifest.size_bits(m, n)) - t;
      const double x_capped = std::max(x, b + p - buffer_cap_s);
      const double y = std::max(x_capped - b, 0.0);
      const double nt = t + x_capped;
      const double nb = b - x_capped + y + p;
      path[n] = OracleStep{m, nt, nb, y};
      self(self, n + 1, nt, nb, utility + manifest.utility(m), stall + y);
    }
  };
  walk(walk, 0, 0.0, 0.0, 0.0, 0.0);
  best.states = static_cast<std::size_t>(sequences);
  return best;
}

}  // namespace bola
