// bola_lab: simulate, bound, sweep and compare BOLA players on network traces.
//
// Exit codes: 0 ok, 1 usage, 2 input error, 3 simulation/oracle error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "bola/bola.hpp"

namespace fs = std::filesystem;
using bola::detail::format_double;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitRun = 3;

struct RunSpec {
  std::string manifest;
  std::string trace;
  std::optional<int> profile;
  bool cyclic = false;
  std::string variant = "bola-finite";
  double gamma_p = 5.0;
  std::optional<double> buffer_s;
  std::optional<double> v;
  std::optional<double> minutes;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string name;
  std::string format = "csv";
  double delta = 0.1;
  std::optional<double> b_max;
  bool no_abandon = false;
  std::optional<std::size_t> max_abandon;
  unsigned jobs = 0;
};

constexpr double kDefaultBufferS = 25.0;
constexpr std::size_t kDefaultChunks = 200;
constexpr double kDefaultChunkS = 3.0;

struct Source {
  bola::NetworkTrace trace;
  std::string label;  // "profile-3" or the trace path
};

Source load_source(const RunSpec& spec, std::optional<int> profile_override = std::nullopt) {
  const auto profile = profile_override ? profile_override : spec.profile;
  if (profile) return {bola::gen_profile(*profile), "profile-" + std::to_string(*profile)};
  bola::TraceLoadOptions options;
  options.cyclic = spec.cyclic;
  auto loaded = bola::load_trace(spec.trace, options);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  return {std::move(loaded.trace), spec.trace};
}

bola::VideoManifest load_video(const RunSpec& spec) {
  auto manifest = spec.manifest.empty()
                      ? bola::gen_vbr_manifest(kDefaultChunks, kDefaultChunkS, bola::reference_ladder_stats(), spec.seed)
                      : bola::load_manifest(spec.manifest);
  if (spec.minutes) manifest = bola::repeat_to_length(manifest, *spec.minutes * 60.0);
  return manifest;
}

bola::PlayerConfig player_config(const RunSpec& spec, const bola::VideoManifest& manifest, bola::Variant variant,
                                 std::optional<double> buffer_s, std::optional<double> v, double gamma_p) {
  bola::PlayerConfig c;
  c.variant = variant;
  c.gamma_p = gamma_p;
  if (v)
    c.v = v;
  else
    c.buffer_chunks = buffer_s.value_or(kDefaultBufferS) / manifest.chunk_duration_s;
  if (spec.no_abandon) c.abandonment = false;
  c.max_abandonments_per_chunk = spec.max_abandon;
  return c;
}

fs::path out_dir(const RunSpec& spec) {
  if (!spec.out_dir.empty()) return spec.out_dir;
  if (const char* env = std::getenv("BOLA_OUT_DIR"); env && *env) return env;
  return ".";
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bola::Error("cannot write '" + path.string() + "'");
  body(out);
  out.flush();
  if (!out) throw bola::Error("failed writing '" + path.string() + "'");
}

void write_reports(const RunSpec& spec, const std::string& stem, const std::vector<bola::ReportRow>& rows) {
  const auto dir = out_dir(spec);
  if (spec.format == "csv" || spec.format == "both")
    write_file(dir / (stem + "_report.csv"), [&](std::ostream& o) { bola::write_report_csv(o, rows, spec.seed); });
  if (spec.format == "json" || spec.format == "both")
    write_file(dir / (stem + "_report.json"), [&](std::ostream& o) { bola::write_report_json(o, rows, spec.seed); });
}

// Runs f(i) for i in [0, n) on up to `jobs` threads; results land by index.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& f) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void print_metrics(const std::string& label, const bola::Metrics& m) {
  std::cout << label << ": utility " << format_double(m.playback_utility) << ", smoothness "
            << format_double(m.smoothness) << ", oracle_form " << format_double(m.oracle_form) << ", avg bitrate "
            << format_double(m.avg_bitrate_mbps) << " Mbps, rebuffer " << format_double(m.rebuffer_s) << " s"
            << (m.partial ? " (partial)" : "") << '\n';
}

std::vector<std::pair<std::string, std::string>> run_keys(const std::string& source, bola::Variant variant,
                                                          double gamma_p, const bola::SessionLog& log) {
  return {{"source", source},
          {"variant", std::string(bola::to_string(variant))},
          {"gamma_p", format_double(gamma_p)},
          {"buffer_s", format_double(log.buffer_chunks * log.chunk_duration_s)},
          {"v", format_double(log.v)}};
}

int cmd_simulate(const RunSpec& spec) {
  const auto manifest = load_video(spec);
  const auto source = load_source(spec);
  const auto variant = bola::parse_variant(spec.variant);
  const auto config = player_config(spec, manifest, variant, spec.buffer_s, spec.v, spec.gamma_p);
  const auto log = bola::simulate(manifest, source.trace, config);
  for (const auto& w : log.warnings) std::cerr << "warning: " << w << '\n';
  const auto metrics = bola::compute(log, manifest, spec.gamma_p);
  const std::string stem = spec.name.empty() ? "simulate" : spec.name;
  write_file(out_dir(spec) / (stem + "_log.csv"), [&](std::ostream& o) { bola::write_session_log(o, log); });
  write_reports(spec, stem, {{run_keys(source.label, variant, spec.gamma_p, log), metrics, {}}});
  print_metrics(std::string(bola::to_string(variant)), metrics);
  return 0;
}

double oracle_cap_s(const RunSpec& spec, std::optional<double> buffer_s) {
  return spec.b_max.value_or(buffer_s.value_or(kDefaultBufferS));
}

int cmd_oracle(const RunSpec& spec) {
  const auto manifest = load_video(spec);
  const auto source = load_source(spec);
  bola::OracleOptions options;
  options.delta_s = spec.delta;
  options.buffer_cap_s = oracle_cap_s(spec, spec.buffer_s);
  const auto result = bola::offline_optimal(manifest, source.trace, spec.gamma_p, options);
  const std::string stem = spec.name.empty() ? "oracle" : spec.name;
  write_file(out_dir(spec) / (stem + "_oracle.csv"), [&](std::ostream& o) {
    o << "# bola-lab oracle v1 seed=" << spec.seed << " source=" << source.label
      << " gamma_p=" << format_double(spec.gamma_p) << " delta_s=" << format_double(options.delta_s)
      << " b_max_s=" << format_double(options.buffer_cap_s) << " r_star=" << format_double(result.best_ratio) << '\n';
    o << "n,m,finish_s,buffer_s,rebuffer_s\n";
    for (std::size_t n = 0; n < result.path.size(); ++n) {
      const auto& s = result.path[n];
      o << n + 1 << ',' << s.level + 1 << ',' << format_double(s.finish_s) << ',' << format_double(s.buffer_s) << ','
        << format_double(s.rebuffer_s) << '\n';
    }
  });
  std::cout << "r* = " << format_double(result.best_ratio) << " (" << source.label << ", " << result.states
            << " states)\n";
  return 0;
}

struct SweepSpec {
  std::vector<int> profiles;
  std::vector<std::string> variants;
  std::vector<double> buffers_s;
  std::vector<double> vs;
  std::vector<double> gammas;
};

int cmd_sweep(const RunSpec& spec, const SweepSpec& sweep) {
  const auto manifest = load_video(spec);
  std::vector<std::optional<int>> sources;
  if (!sweep.profiles.empty())
    for (int p : sweep.profiles) sources.emplace_back(p);
  else
    sources.emplace_back(std::nullopt);
  std::vector<std::string> variants = sweep.variants.empty() ? std::vector<std::string>{spec.variant} : sweep.variants;
  // Buffer sizes and explicit V values are alternative axes for the control parameter.
  struct Control {
    std::optional<double> buffer_s, v;
  };
  std::vector<Control> controls;
  for (double b : sweep.buffers_s) controls.push_back({b, std::nullopt});
  for (double v : sweep.vs) controls.push_back({std::nullopt, v});
  if (controls.empty()) controls.push_back({spec.v ? std::nullopt : spec.buffer_s, spec.v});
  std::vector<double> gammas = sweep.gammas.empty() ? std::vector<double>{spec.gamma_p} : sweep.gammas;

  struct Point {
    std::optional<int> profile;
    bola::Variant variant;
    Control control;
    double gamma_p;
  };
  std::vector<Point> points;
  for (const auto& s : sources)
    for (const auto& var : variants)
      for (const auto& c : controls)
        for (double g : gammas) points.push_back({s, bola::parse_variant(var), c, g});

  std::vector<Source> loaded;
  for (const auto& s : sources) loaded.push_back(load_source(spec, s));
  std::vector<bola::ReportRow> rows(points.size());
  parallel_for(points.size(), spec.jobs, [&](std::size_t i) {
    const auto& pt = points[i];
    const auto source_index = static_cast<std::size_t>(std::find(sources.begin(), sources.end(), pt.profile) -
                                                       sources.begin());
    const auto& src = loaded[source_index];
    const auto config = player_config(spec, manifest, pt.variant, pt.control.buffer_s, pt.control.v, pt.gamma_p);
    const auto log = bola::simulate(manifest, src.trace, config);
    rows[i] = {run_keys(src.label, pt.variant, pt.gamma_p, log), bola::compute(log, manifest, pt.gamma_p), {}};
  });
  write_reports(spec, spec.name.empty() ? "sweep" : spec.name, rows);
  std::cout << rows.size() << " grid points\n";
  return 0;
}

int cmd_compare(const RunSpec& spec, const SweepSpec& sweep) {
  const auto manifest = load_video(spec);
  std::vector<std::optional<int>> sources;
  if (!sweep.profiles.empty())
    for (int p : sweep.profiles) sources.emplace_back(p);
  else if (spec.profile || !spec.trace.empty())
    sources.emplace_back(spec.profile);
  else
    for (int p = 1; p <= 12; ++p) sources.emplace_back(p);
  std::vector<std::string> variants =
      sweep.variants.empty() ? std::vector<std::string>{"bola-finite", "bola-u"} : sweep.variants;
  const double buffer_s = spec.buffer_s.value_or(kDefaultBufferS);
  const double cap_s = oracle_cap_s(spec, buffer_s);

  std::vector<Source> loaded;
  for (const auto& s : sources) loaded.push_back(load_source(spec, s));
  std::vector<bola::OracleResult> bounds(sources.size());
  parallel_for(sources.size(), spec.jobs, [&](std::size_t i) {
    bola::OracleOptions options;
    options.delta_s = spec.delta;
    options.buffer_cap_s = cap_s;
    bounds[i] = bola::offline_optimal(manifest, loaded[i].trace, spec.gamma_p, options);
  });

  std::vector<bola::ReportRow> rows;
  bool over = false;
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (const auto& var : variants) {
      const auto variant = bola::parse_variant(var);
      const auto config = player_config(spec, manifest, variant, buffer_s, spec.v, spec.gamma_p);
      const auto log = bola::simulate(manifest, loaded[i].trace, config);
      const auto metrics = bola::compute(log, manifest, spec.gamma_p);
      const double r_star = bounds[i].best_ratio;
      const double ratio = metrics.oracle_form / r_star;
      over = over || metrics.oracle_form > r_star + 1e-9;
      rows.push_back({run_keys(loaded[i].label, variant, spec.gamma_p, log), metrics,
                      {{"r_star", r_star}, {"ratio", ratio}}});
      std::cout << loaded[i].label << ' ' << var << ": ratio " << format_double(ratio) << '\n';
    }
  write_reports(spec, spec.name.empty() ? "compare" : spec.name, rows);
  if (over) std::cerr << "warning: a session scored above the offline bound\n";
  return 0;
}

int cmd_gen_profile(const RunSpec& spec, const std::string& out) {
  if (!spec.profile) throw bola::ParameterError("gen-profile needs --profile");
  const auto trace = bola::gen_profile(*spec.profile);
  if (out == "-") {
    bola::write_trace(std::cout, trace);
    return 0;
  }
  const fs::path path = out.empty() ? out_dir(spec) / ("profile-" + std::to_string(*spec.profile) + ".csv") : fs::path(out);
  write_file(path, [&](std::ostream& o) { bola::write_trace(o, trace); });
  return 0;
}

int cmd_gen_manifest(const RunSpec& spec, std::size_t chunks, double chunk_s, bool constant, const std::string& out) {
  std::vector<double> rates;
  for (const auto& s : bola::reference_ladder_stats()) rates.push_back(s.nominal_mbps);
  auto manifest = constant ? bola::constant_manifest(chunks, chunk_s, rates)
                           : bola::gen_vbr_manifest(chunks, chunk_s, bola::reference_ladder_stats(), spec.seed);
  if (spec.minutes) manifest = bola::repeat_to_length(manifest, *spec.minutes * 60.0);
  if (out == "-") {
    bola::write_manifest(std::cout, manifest);
    return 0;
  }
  const fs::path path = out.empty() ? out_dir(spec) / "manifest.json" : fs::path(out);
  write_file(path, [&](std::ostream& o) { bola::write_manifest(o, manifest); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOLA bitrate adaptation lab"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  RunSpec spec;
  auto* manifest_opt = app.add_option("--manifest", spec.manifest, "Manifest JSON (default: seeded synthetic ladder)");
  auto* trace_opt = app.add_option("--trace", spec.trace, "Trace CSV: duration_s,bandwidth_kbps[,latency_ms]");
  auto* profile_opt = app.add_option("--profile", spec.profile, "Built-in network profile 1-12")->check(CLI::Range(1, 12));
  trace_opt->excludes(profile_opt);
  app.add_flag("--cyclic", spec.cyclic, "Repeat the trace file when it runs out");
  app.add_option("--variant", spec.variant, "bola-basic | bola-finite | bola-o | bola-u")->capture_default_str();
  app.add_option("--gamma-p", spec.gamma_p, "Smoothness weight gamma*p")->capture_default_str();
  auto* buffer_opt = app.add_option("--buffer-s", spec.buffer_s, "Buffer size in seconds (default 25)");
  auto* v_opt = app.add_option("--v", spec.v, "Control parameter V (instead of --buffer-s)");
  buffer_opt->excludes(v_opt);
  app.add_option("--minutes", spec.minutes, "Video length; the manifest is repeated to reach it");
  app.add_option("--seed", spec.seed, "Seed for synthetic manifests; recorded in every report")->capture_default_str();
  app.add_option("--out-dir", spec.out_dir, "Output directory (default $BOLA_OUT_DIR or .)");
  app.add_option("--name", spec.name, "Output file stem (default: subcommand name)");
  app.add_option("--format", spec.format, "Report format")
      ->check(CLI::IsMember({"csv", "json", "both"}))
      ->capture_default_str();
  app.add_option("--delta", spec.delta, "Oracle time quantum in seconds")->capture_default_str();
  app.add_option("--b-max", spec.b_max, "Oracle buffer cap in seconds (default: buffer size)");
  app.add_flag("--no-abandon", spec.no_abandon, "Disable download abandonment");
  app.add_option("--max-abandon", spec.max_abandon, "Cap on restarts per chunk (default: none)");
  app.add_option("--jobs", spec.jobs, "Worker threads for sweep/compare (0 = all cores)");
  (void)manifest_opt;

  auto* simulate = app.add_subcommand("simulate", "Simulate one session; writes log and report");
  auto* oracle = app.add_subcommand("oracle", "Offline optimal bound r* and its bitrate path");

  SweepSpec sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Simulate every point of a parameter grid");
  sweep_cmd->add_option("--profiles", sweep.profiles, "Profiles to sweep")->check(CLI::Range(1, 12));
  sweep_cmd->add_option("--variants", sweep.variants, "Variants to sweep");
  sweep_cmd->add_option("--buffers", sweep.buffers_s, "Buffer sizes in seconds");
  sweep_cmd->add_option("--vs", sweep.vs, "V values");
  sweep_cmd->add_option("--gammas", sweep.gammas, "gamma*p values");

  SweepSpec cmp;
  auto* compare = app.add_subcommand("compare", "Ratio of oracle_form to r* per trace and variant");
  compare->add_option("--profiles", cmp.profiles, "Profiles (default 1-12)")->check(CLI::Range(1, 12));
  compare->add_option("--variants", cmp.variants, "Variants (default bola-finite bola-u)");

  std::string out;
  auto* gen_profile = app.add_subcommand("gen-profile", "Write a built-in network profile as a trace file");
  gen_profile->add_option("--out", out, "Destination file, or - for stdout");

  std::size_t chunks = kDefaultChunks;
  double chunk_s = kDefaultChunkS;
  bool constant = false;
  auto* gen_manifest = app.add_subcommand("gen-manifest", "Write a synthetic manifest");
  gen_manifest->add_option("--chunks", chunks, "Number of chunks")->capture_default_str();
  gen_manifest->add_option("--chunk-s", chunk_s, "Chunk duration in seconds")->capture_default_str();
  gen_manifest->add_flag("--constant", constant, "Constant chunk sizes (no VBR)");
  gen_manifest->add_option("--out", out, "Destination file, or - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  const bool needs_source = !gen_profile->parsed() && !gen_manifest->parsed() && !compare->parsed() &&
                            !(sweep_cmd->parsed() && !sweep.profiles.empty());
  if (needs_source && spec.trace.empty() && !spec.profile) {
    std::cerr << "error: need --trace or --profile\n";
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(spec);
    if (oracle->parsed()) return cmd_oracle(spec);
    if (sweep_cmd->parsed()) return cmd_sweep(spec, sweep);
    if (compare->parsed()) return cmd_compare(spec, cmp);
    if (gen_profile->parsed()) return cmd_gen_profile(spec, out);
    if (gen_manifest->parsed()) return cmd_gen_manifest(spec, chunks, chunk_s, constant, out);
  } catch (const bola::SimulationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRun;
  } catch (const bola::ResourceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRun;
  } catch (const bola::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const bola::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}
