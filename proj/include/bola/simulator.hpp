#pragma once

// Deterministic playback simulation of one streaming session.
//
// Time advances in variable-length slots: each slot is one chunk download,
// one sleep (BASIC waiting for the buffer to drop to its cutoff) or one
// pause (FINITE/O/U). The buffer follows
//   Q(t_{k+1}) = max[Q(t_k) - T_k/p, 0] + downloaded_k
// and any part of a slot during which the buffer is empty is a stall.
// Everything before the first chunk arrives is startup stall.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bola/model.hpp"
#include "bola/policy.hpp"
#include "bola/trace.hpp"

namespace bola {

inline double step_buffer(double buffer_chunks, double slot_s, bool downloaded, double chunk_duration_s) {
  return std::max(buffer_chunks - slot_s / chunk_duration_s, 0.0) + (downloaded ? 1.0 : 0.0);
}

enum class SlotKind { Download, Sleep, Pause };

inline const char* to_string(SlotKind k) {
  switch (k) {
    case SlotKind::Download: return "download";
    case SlotKind::Sleep: return "sleep";
    case SlotKind::Pause: return "pause";
  }
  return "?";
}

struct Abandoned {
  std::size_t level = 0;     // first level given up on this chunk
  double wasted_bits = 0.0;  // bits delivered and discarded, over all restarts
};

struct SlotRecord {
  std::size_t slot = 0;   // k, 0-based
  SlotKind kind = SlotKind::Download;
  std::size_t chunk = 0;  // chunk being (or about to be) downloaded, 0-based
  std::size_t level = 0;  // final download level; meaningless for waits
  double start_s = 0.0;
  double duration_s = 0.0;
  double bits = 0.0;      // bits of the chunk as finally downloaded
  double buffer_start_chunks = 0.0;
  double buffer_end_chunks = 0.0;
  double rebuffer_s = 0.0;
  double v = 0.0;         // control parameter in force for this slot
  std::optional<Abandoned> abandoned;
};

struct SessionLog {
  std::vector<SlotRecord> slots;
  std::size_t chunk_count = 0;
  double chunk_duration_s = 0.0;
  double gamma_p = 0.0;
  double buffer_chunks = 0.0;  // Q_max the session ran with
  double v = 0.0;              // fixed V (BASIC) or the Q_max-derived V
  Variant variant = Variant::Basic;

  double end_s = 0.0;               // T_end
  double last_download_end_s = 0.0;
  double final_buffer_chunks = 0.0;
  double startup_delay_s = 0.0;
  double rebuffer_s = 0.0;          // total stall, startup included
  double utility_sum = 0.0;         // accumulated online as chunks complete
  std::vector<std::string> warnings;

  std::size_t downloaded_chunks() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.kind == SlotKind::Download;
    return n;
  }
  bool complete() const { return chunk_count > 0 && downloaded_chunks() == chunk_count; }
  double mid_stream_rebuffer_s() const { return rebuffer_s - startup_delay_s; }

  std::vector<std::size_t> levels() const {
    std::vector<std::size_t> out;
    out.reserve(chunk_count);
    for (const auto& s : slots)
      if (s.kind == SlotKind::Download) out.push_back(s.level);
    return out;
  }
};

namespace detail {

class Session {
 public:
  Session(const VideoManifest& manifest, const NetworkTrace& trace, const PlayerConfig& config)
      : manifest_(manifest), trace_(trace), config_(config), p_(manifest.chunk_duration_s) {
    validate(manifest_);
    params_ = resolve(config_, manifest_.top_utility());
    utilities_ = manifest_.utilities();
    log_.chunk_count = manifest_.chunk_count();
    log_.chunk_duration_s = p_;
    log_.gamma_p = config_.gamma_p;
    log_.buffer_chunks = params_.buffer_chunks;
    log_.v = params_.v;
    log_.variant = config_.variant;
    if (params_.warning && config_.variant == Variant::Basic) log_.warnings.push_back(*params_.warning);
  }

  SessionLog run() {
    const std::size_t n_chunks = manifest_.chunk_count();
    for (std::size_t n = 0; n < n_chunks; ++n) {
      const auto sizes = manifest_.chunk_sizes(n);
      std::size_t level = 0;
      double v = params_.v;
      if (config_.variant == Variant::Basic) {
        const Decision d = bola_basic_decide(buffer_, v, config_.gamma_p, manifest_, n);
        if (const auto* sleep = std::get_if<SleepUntilBufferBelow>(&d)) {
          wait(SlotKind::Sleep, n, (buffer_ - sleep->threshold_chunks) * p_, v);
          buffer_ = sleep->threshold_chunks;
          level = best_level(buffer_, v, config_.gamma_p, utilities_, sizes);
        } else {
          level = std::get<Download>(d).level;
        }
      } else {
        const auto dyn = dynamic_v(static_cast<double>(n) * p_, static_cast<double>(n_chunks - n) * p_,
                                   params_.buffer_chunks, manifest_.top_utility(), config_.gamma_p, p_,
                                   config_.minimum_buffer_chunks);
        v = dyn.v;
        level = best_level(buffer_, v, config_.gamma_p, utilities_, sizes);
        if (previous_level_ && level < *previous_level_ && measured_bps_) {
          const Decision d = oscillation_guard(level, *previous_level_, *measured_bps_, sizes, utilities_,
                                               config_.variant, v, config_.gamma_p, buffer_, p_);
          if (const auto* pause = std::get_if<PauseFor>(&d)) {
            wait(SlotKind::Pause, n, pause->duration_s, v);
            level = pause->level;
          } else {
            level = std::get<Download>(d).level;
          }
        }
        wait(SlotKind::Pause, n, std::max(p_ * (buffer_ - dyn.buffer_chunks + 1.0), 0.0), v);
      }
      try {
        download(n, level, v, sizes);
      } catch (const SimulationError& e) {
        throw SimulationError("chunk " + std::to_string(n + 1) + ": " + e.what());
      }
    }
    log_.last_download_end_s = now_;
    log_.final_buffer_chunks = buffer_;
    log_.end_s = now_ + buffer_ * p_;
    return std::move(log_);
  }

 private:
  double stall_for(double slot_s, double buffer_start) const {
    if (!playing_) return slot_s;
    return std::max(slot_s - buffer_start * p_, 0.0);
  }

  void wait(SlotKind kind, std::size_t chunk, double duration_s, double v) {
    if (!(duration_s > 0.0)) return;
    SlotRecord r;
    r.slot = log_.slots.size();
    r.kind = kind;
    r.chunk = chunk;
    r.start_s = now_;
    r.duration_s = duration_s;
    r.buffer_start_chunks = buffer_;
    r.rebuffer_s = stall_for(duration_s, buffer_);
    r.v = v;
    buffer_ = step_buffer(buffer_, duration_s, false, p_);
    now_ += duration_s;
    log_.rebuffer_s += r.rebuffer_s;
    r.buffer_end_chunks = buffer_;
    log_.slots.push_back(r);
  }

  void download(std::size_t chunk, std::size_t level, double v, const std::vector<double>& sizes) {
    SlotRecord r;
    r.slot = log_.slots.size();
    r.kind = SlotKind::Download;
    r.chunk = chunk;
    r.start_s = now_;
    r.buffer_start_chunks = buffer_;
    r.v = v;

    const double start = now_;
    double measure_from = start;
    double finish = 0.0;
    if (!config_.abandonment_enabled()) {
      finish = transfer_time(trace_, start, sizes[level]);
    } else {
      const double tick = config_.abandonment_tick_s;
      double data_start = start + trace_.latency_at(start);
      std::size_t restarts = 0;
      double delivered = 0.0;
      double cur = start;
      while (true) {
        finish = finish_time(trace_, std::max(cur, data_start), sizes[level] - delivered);
        double next_tick = start + tick * (std::floor((cur - start) / tick) + 1.0);
        if (next_tick <= cur) next_tick = cur + tick;
        const double check = std::min(next_tick, trace_.next_boundary(cur));
        if (finish <= check) break;
        if (check > data_start) delivered += delivered_bits(trace_, std::max(cur, data_start), check);
        cur = check;
        const double q_now = std::max(r.buffer_start_chunks - (cur - start) / p_, 0.0);
        const auto alt = shall_abandon(level, sizes[level] - delivered, q_now, v, config_.gamma_p, sizes, utilities_);
        const auto& cap = config_.max_abandonments_per_chunk;
        if (alt && (!cap || restarts < *cap)) {
          if (!r.abandoned) r.abandoned = Abandoned{level, 0.0};
          r.abandoned->wasted_bits += delivered;
          level = *alt;
          measure_from = cur;
          ++restarts;
          delivered = 0.0;
          data_start = cur + trace_.latency_at(cur);
        }
      }
    }

    r.level = level;
    r.bits = sizes[level];
    r.duration_s = finish - start;
    r.rebuffer_s = stall_for(r.duration_s, buffer_);
    log_.rebuffer_s += r.rebuffer_s;
    if (!playing_) {
      log_.startup_delay_s = log_.rebuffer_s;
      playing_ = true;
    }
    buffer_ = step_buffer(buffer_, r.duration_s, true, p_);
    now_ = finish;
    r.buffer_end_chunks = buffer_;
    log_.utility_sum += utilities_[level];
    log_.slots.push_back(r);

    previous_level_ = level;
    const double elapsed = finish - measure_from;
    if (elapsed > 0.0) measured_bps_ = sizes[level] / elapsed;
  }

  const VideoManifest& manifest_;
  const NetworkTrace& trace_;
  PlayerConfig config_;
  double p_;
  ResolvedParameters params_;
  std::vector<double> utilities_;
  SessionLog log_;

  double now_ = 0.0;
  double buffer_ = 0.0;
  bool playing_ = false;
  std::optional<std::size_t> previous_level_;
  std::optional<double> measured_bps_;
};

}  // namespace detail

inline SessionLog simulate(const VideoManifest& manifest, const NetworkTrace& trace, const PlayerConfig& config) {
  return detail::Session(manifest, trace, config).run();
}

}  // namespace bola
