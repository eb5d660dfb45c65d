#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rscusum {

/// Append-only run record. One JSON object per line; a run is reproducible
/// from its manifest entry alone (subcommand + config + resolved seed).
struct RunManifest {
  std::string subcommand;
  std::string config_path;
  std::string config_echo;  // resolved config as a JSON string
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string artifact_version;
  double wall_clock_seconds = 0.0;
};

void append_manifest(const RunManifest& m, const std::string& path);

constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace rscusum
