#pragma once

// Manifest file (JSON, schema "bola-manifest" v1):
//
//   {
//     "format": "bola-manifest",
//     "version": 1,
//     "chunk_duration_s": 3,
//     "chunk_count": 200,
//     "levels": [                              // highest bitrate first
//       {"nominal_bitrate_kbps": 6000,
//        "utility": 3.26,                      // optional; log utilities if absent
//        "sizes_bits": [18000000, ...]},       // chunk_count entries
//       ...
//     ]
//   }
//
// Doubles are written with round-trip precision, so write -> read is exact.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "bola/error.hpp"
#include "bola/model.hpp"

namespace bola {

inline constexpr const char* kManifestFormat = "bola-manifest";
inline constexpr int kManifestVersion = 1;

inline nlohmann::ordered_json manifest_to_json(const VideoManifest& manifest) {
  nlohmann::ordered_json j;
  j["format"] = kManifestFormat;
  j["version"] = kManifestVersion;
  j["chunk_duration_s"] = manifest.chunk_duration_s;
  j["chunk_count"] = manifest.chunk_count();
  auto levels = nlohmann::ordered_json::array();
  for (const auto& level : manifest.levels) {
    nlohmann::ordered_json l;
    l["nominal_bitrate_kbps"] = level.nominal_kbps;
    l["utility"] = level.utility;
    l["sizes_bits"] = level.chunk_sizes_bits;
    levels.push_back(std::move(l));
  }
  j["levels"] = std::move(levels);
  return j;
}

inline VideoManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("format") && j.at("format").get<std::string>() != kManifestFormat)
      throw ParseError("not a bola-manifest document");
    if (j.contains("version") && j.at("version").get<int>() != kManifestVersion)
      throw ParseError("unsupported manifest version " + std::to_string(j.at("version").get<int>()));
    VideoManifest manifest;
    manifest.chunk_duration_s = j.at("chunk_duration_s").get<double>();
    bool all_utilities = true;
    for (const auto& l : j.at("levels")) {
      BitrateLevel level;
      level.nominal_kbps = l.at("nominal_bitrate_kbps").get<double>();
      level.chunk_sizes_bits = l.at("sizes_bits").get<std::vector<double>>();
      if (l.contains("utility") && !l.at("utility").is_null())
        level.utility = l.at("utility").get<double>();
      else
        all_utilities = false;
      manifest.levels.push_back(std::move(level));
    }
    if (j.contains("chunk_count") && j.at("chunk_count").get<std::size_t>() != manifest.chunk_count())
      throw InvalidManifest("chunk_count does not match the size lists");
    if (!all_utilities) manifest = log_utilities(std::move(manifest));
    validate(manifest);
    return manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

inline void write_manifest(std::ostream& out, const VideoManifest& manifest) {
  out << manifest_to_json(manifest).dump(1) << '\n';
}

inline VideoManifest read_manifest(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

inline void save_manifest(const std::string& path, const VideoManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path + "'");
  write_manifest(out, manifest);
  if (!out) throw Error("failed writing manifest '" + path + "'");
}

inline VideoManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest '" + path + "'");
  return read_manifest(in);
}

}  // namespace bola
