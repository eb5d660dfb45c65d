#include "rscusum/manifest.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "rscusum/errors.hpp"

namespace rscusum {

void append_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  j["unix_time"] =
      std::chrono::duration_cast<std::chrono::seconds>(now).count();
  j["subcommand"] = m.subcommand;
  j["config_path"] = m.config_path;
  if (!m.config_echo.empty())
    j["config"] = nlohmann::json::parse(m.config_echo, nullptr, false);
  j["seed"] = m.seed;
  j["outputs"] = m.outputs;
  j["artifact_version"] =
      m.artifact_version.empty() ? kArtifactVersion : m.artifact_version;
  j["wall_clock_seconds"] = m.wall_clock_seconds;

  std::ofstream out(path, std::ios::app);
  if (!out) throw io_error("cannot append manifest: " + path);
  out << j.dump() << '\n';
  if (!out) throw io_error("manifest write failed: " + path);
}

}  // namespace rscusum
