#pragma once

// Scores of a finished session, recomputed from the slot records alone, and
// the report writers.
//
// Report schema v1. Tabular form is CSV preceded by one comment line
//   # bola-lab report v1 seed=<seed>
// then a header: the key columns of the run, the Metrics fields in the order
// of kMetricFields, then any extra columns. The hierarchical form is JSON
// {"format": "bola-lab-report", "version": 1, "seed": ..., "rows": [...]}.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bola/model.hpp"
#include "bola/simulator.hpp"
#include "bola/traces.hpp"

namespace bola {

struct Metrics {
  double playback_utility = 0.0;   // sum utility / T_end, per second
  double smoothness = 0.0;         // N p / T_end
  double joint = 0.0;              // playback_utility + gamma * smoothness
  double oracle_form = 0.0;        // (sum utility - gamma R) / (last download end + final buffer)
  double avg_bitrate_mbps = 0.0;
  double avg_bitrate_change_mbps = 0.0;
  double rebuffer_to_play = 0.0;   // mid-stream stalls / (N p)
  double startup_delay_s = 0.0;
  double rebuffer_s = 0.0;         // startup included
  double mid_stream_rebuffer_s = 0.0;
  double end_s = 0.0;
  double wasted_bits = 0.0;
  std::size_t abandonments = 0;
  std::size_t chunks = 0;
  bool partial = false;            // session did not play every chunk
};

inline constexpr const char* kMetricFields[] = {
    "playback_utility", "smoothness",     "joint",          "oracle_form",          "avg_bitrate_mbps",
    "avg_bitrate_change_mbps", "rebuffer_to_play", "startup_delay_s", "rebuffer_s", "mid_stream_rebuffer_s",
    "end_s",            "wasted_bits",    "abandonments",   "chunks",               "partial"};

inline Metrics compute(const SessionLog& log, const VideoManifest& manifest, double gamma_p) {
  Metrics out;
  const double p = manifest.chunk_duration_s;
  const double gamma = gamma_p / p;
  double utility = 0.0;
  double bitrate_sum = 0.0;
  double change_sum = 0.0;
  std::optional<double> previous_mbps;
  bool seen_download = false;
  double last_end = 0.0;
  double final_buffer = 0.0;
  for (const auto& s : log.slots) {
    out.rebuffer_s += s.rebuffer_s;
    if (!seen_download) out.startup_delay_s += s.rebuffer_s;
    last_end = s.start_s + s.duration_s;
    final_buffer = s.buffer_end_chunks;
    if (s.kind != SlotKind::Download) continue;
    seen_download = true;
    ++out.chunks;
    utility += manifest.utility(s.level);
    const double mbps = manifest.levels[s.level].nominal_mbps();
    bitrate_sum += mbps;
    if (previous_mbps) change_sum += std::abs(mbps - *previous_mbps);
    previous_mbps = mbps;
    if (s.abandoned) {
      ++out.abandonments;
      out.wasted_bits += s.abandoned->wasted_bits;
    }
  }
  out.partial = out.chunks != manifest.chunk_count();
  out.end_s = last_end + final_buffer * p;
  out.mid_stream_rebuffer_s = out.rebuffer_s - out.startup_delay_s;
  if (out.chunks > 0) out.avg_bitrate_mbps = bitrate_sum / static_cast<double>(out.chunks);
  if (out.chunks > 1) out.avg_bitrate_change_mbps = change_sum / static_cast<double>(out.chunks - 1);
  const double played = static_cast<double>(out.chunks) * p;
  if (out.end_s > 0.0) {
    out.playback_utility = utility / out.end_s;
    out.smoothness = played / out.end_s;
    out.joint = out.playback_utility + gamma * out.smoothness;
    out.oracle_form = (utility - gamma * out.rebuffer_s) / out.end_s;
  }
  if (played > 0.0) out.rebuffer_to_play = out.mid_stream_rebuffer_s / played;
  return out;
}

// Average |bitrate(n+1) - bitrate(n)| over the chunks from `first_chunk` on.
inline double bitrate_change_from(const SessionLog& log, const VideoManifest& manifest, std::size_t first_chunk) {
  const auto levels = log.levels();
  if (levels.size() < first_chunk + 2) return 0.0;
  double sum = 0.0;
  for (std::size_t n = first_chunk + 1; n < levels.size(); ++n)
    sum += std::abs(manifest.levels[levels[n]].nominal_mbps() - manifest.levels[levels[n - 1]].nominal_mbps());
  return sum / static_cast<double>(levels.size() - first_chunk - 1);
}

struct ReportRow {
  std::vector<std::pair<std::string, std::string>> keys;
  Metrics metrics;
  std::vector<std::pair<std::string, double>> extras;
};

namespace detail {

inline std::vector<std::string> metric_values(const Metrics& m) {
  return {format_double(m.playback_utility),
          format_double(m.smoothness),
          format_double(m.joint),
          format_double(m.oracle_form),
          format_double(m.avg_bitrate_mbps),
          format_double(m.avg_bitrate_change_mbps),
          format_double(m.rebuffer_to_play),
          format_double(m.startup_delay_s),
          format_double(m.rebuffer_s),
          format_double(m.mid_stream_rebuffer_s),
          format_double(m.end_s),
          format_double(m.wasted_bits),
          std::to_string(m.abandonments),
          std::to_string(m.chunks),
          m.partial ? "1" : "0"};
}

}  // namespace detail

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows, std::uint64_t seed) {
  out << "# bola-lab report v1 seed=" << seed << '\n';
  if (rows.empty()) return;
  bool first = true;
  auto cell = [&](const std::string& v) {
    if (!first) out << ',';
    out << v;
    first = false;
  };
  for (const auto& [k, v] : rows.front().keys) cell(k);
  for (const char* f : kMetricFields) cell(f);
  for (const auto& [k, v] : rows.front().extras) cell(k);
  out << '\n';
  for (const auto& row : rows) {
    first = true;
    for (const auto& [k, v] : row.keys) cell(v);
    for (const auto& v : detail::metric_values(row.metrics)) cell(v);
    for (const auto& [k, v] : row.extras) cell(detail::format_double(v));
    out << '\n';
  }
}

inline nlohmann::ordered_json metrics_to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  const auto values = detail::metric_values(m);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string name = kMetricFields[i];
    if (name == "partial")
      j[name] = m.partial;
    else if (name == "abandonments")
      j[name] = m.abandonments;
    else if (name == "chunks")
      j[name] = m.chunks;
    else
      j[name] = std::stod(values[i]);
  }
  return j;
}

inline void write_report_json(std::ostream& out, const std::vector<ReportRow>& rows, std::uint64_t seed) {
  nlohmann::ordered_json doc;
  doc["format"] = "bola-lab-report";
  doc["version"] = 1;
  doc["seed"] = seed;
  auto list = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    for (const auto& [k, v] : row.keys) r[k] = v;
    r["metrics"] = metrics_to_json(row.metrics);
    for (const auto& [k, v] : row.extras) r[k] = v;
    list.push_back(std::move(r));
  }
  doc["rows"] = std::move(list);
  out << doc.dump(2) << '\n';
}

// One row per slot; k, n and m are 1-based and m is 0 for sleep/pause slots.
inline void write_session_log(std::ostream& out, const SessionLog& log) {
  out << "k,n,t_k,T_k,m,bits,Q_start_chunks,rebuffer_s,abandoned,kind\n";
  for (const auto& s : log.slots) {
    const bool dl = s.kind == SlotKind::Download;
    out << s.slot + 1 << ',' << s.chunk + 1 << ',' << detail::format_double(s.start_s) << ','
        << detail::format_double(s.duration_s) << ',' << (dl ? s.level + 1 : 0) << ','
        << detail::format_double(dl ? s.bits : 0.0) << ',' << detail::format_double(s.buffer_start_chunks) << ','
        << detail::format_double(s.rebuffer_s) << ',';
    if (s.abandoned)
      out << s.abandoned->level + 1 << ':' << detail::format_double(s.abandoned->wasted_bits);
    else
      out << '-';
    out << ',' << to_string(s.kind) << '\n';
  }
}

}  // namespace bola
