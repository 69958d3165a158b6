#pragma once

// Piecewise-constant network traces and the transfer-time arithmetic the
// simulator and the oracle share.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bola/error.hpp"

namespace bola {

// Stored in the units of the trace file so that save/load is exact.
struct TraceSegment {
  double duration_s = 0.0;
  double bandwidth_kbps = 0.0;
  double latency_ms = 0.0;  // one-way request delay; no bits flow during it

  double bandwidth_bps() const { return bandwidth_kbps * 1000.0; }
  double latency_s() const { return latency_ms / 1000.0; }
  friend bool operator==(const TraceSegment&, const TraceSegment&) = default;
};

class NetworkTrace {
 public:
  NetworkTrace() = default;
  NetworkTrace(std::vector<TraceSegment> segments, bool cyclic) : segments_(std::move(segments)), cyclic_(cyclic) {
    if (segments_.empty()) throw ParameterError("trace has no segments");
    starts_.reserve(segments_.size() + 1);
    double t = 0.0;
    bool any_bandwidth = false;
    for (const auto& s : segments_) {
      if (!(s.duration_s > 0.0)) throw ParameterError("trace segment duration must be positive");
      if (!(s.bandwidth_kbps >= 0.0)) throw ParameterError("trace bandwidth must be non-negative");
      if (!(s.latency_ms >= 0.0)) throw ParameterError("trace latency must be non-negative");
      any_bandwidth = any_bandwidth || s.bandwidth_kbps > 0.0;
      starts_.push_back(t);
      t += s.duration_s;
    }
    starts_.push_back(t);
    if (cyclic_ && !any_bandwidth) throw ParameterError("cyclic trace has zero bandwidth everywhere");
  }

  const std::vector<TraceSegment>& segments() const { return segments_; }
  bool cyclic() const { return cyclic_; }
  double period_s() const { return starts_.back(); }

  double average_bandwidth_bps() const {
    double bits = 0.0;
    for (const auto& s : segments_) bits += s.bandwidth_bps() * s.duration_s;
    return bits / period_s();
  }

  // Position of instant t: segment index plus that segment's absolute
  // [start, end). Throws once a non-cyclic trace is exhausted.
  struct Cursor {
    std::size_t index = 0;
    double start = 0.0;
    double end = 0.0;
  };

  Cursor locate(double t) const {
    if (t < 0.0) t = 0.0;
    double base = 0.0;
    double local = t;
    if (cyclic_) {
      const double cycles = std::floor(t / period_s());
      base = cycles * period_s();
      local = t - base;
      if (local >= period_s()) {
        base += period_s();
        local -= period_s();
      }
    } else if (t >= period_s()) {
      throw SimulationError("network trace exhausted at t = " + std::to_string(t) + " s");
    }
    auto it = std::upper_bound(starts_.begin(), starts_.end() - 1, local);
    const auto index = static_cast<std::size_t>(std::distance(starts_.begin(), it) - 1);
    Cursor c{index, base + starts_[index], base + starts_[index + 1]};
    while (c.end <= t) c = next(c);  // rounding in base + offset
    return c;
  }

  Cursor next(const Cursor& c) const {
    std::size_t index = c.index + 1;
    if (index == segments_.size()) {
      if (!cyclic_) throw SimulationError("network trace exhausted at t = " + std::to_string(c.end) + " s");
      index = 0;
    }
    return {index, c.end, c.end + segments_[index].duration_s};
  }

  const TraceSegment& at(const Cursor& c) const { return segments_[c.index]; }

  double latency_at(double t) const { return at(locate(t)).latency_s(); }

  // First segment boundary strictly after t (infinity past the end of a
  // non-cyclic trace).
  double next_boundary(double t) const {
    if (!cyclic_ && t >= period_s()) return INFINITY;
    return locate(t).end;
  }

 private:
  std::vector<TraceSegment> segments_;
  std::vector<double> starts_;  // cumulative segment start offsets, plus the period
  bool cyclic_ = false;
};

// Bits delivered over [from, to] with data flowing the whole interval.
inline double delivered_bits(const NetworkTrace& trace, double from, double to) {
  if (!(to > from)) return 0.0;
  double bits = 0.0;
  auto c = trace.locate(from);
  double t = from;
  while (t < to) {
    const double stop = std::min(c.end, to);
    bits += trace.at(c).bandwidth_bps() * (stop - t);
    t = stop;
    if (t < to) c = trace.next(c);
  }
  return bits;
}

// Instant at which `bits` have arrived when data starts flowing at `from`.
inline double finish_time(const NetworkTrace& trace, double from, double bits) {
  if (!(bits > 0.0)) return from;
  auto c = trace.locate(from);
  double t = from;
  double remaining = bits;
  // A cyclic trace with some bandwidth always finishes; a non-cyclic one
  // throws from next() when it runs out.
  while (true) {
    const double bw = trace.at(c).bandwidth_bps();
    const double span = c.end - t;
    if (bw > 0.0) {
      const double capacity = bw * span;
      if (capacity >= remaining) return t + remaining / bw;
      remaining -= capacity;
    }
    t = c.end;
    c = trace.next(c);
  }
}

// Request latency of the segment active at `start`, then the bits.
inline double transfer_time(const NetworkTrace& trace, double start, double bits) {
  return finish_time(trace, start + trace.latency_at(start), bits);
}

}  // namespace bola
