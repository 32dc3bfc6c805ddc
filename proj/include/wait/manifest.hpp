#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace wait {

// Provenance record every artifact-producing command writes next to its
// outputs (run_manifest.json). Timestamps make the manifest itself non
// bitwise-reproducible; the artifacts it describes still are.
struct RunManifest {
  std::string command;
  std::string config_yaml;  // resolved config, empty when the verb takes none
  std::vector<std::pair<std::string, std::string>> dataset_digests;  // root -> digest
  std::string version;
  std::string started_at, finished_at;  // ISO-8601 UTC
  std::vector<std::string> outputs;
  std::vector<std::string> notes;
  std::string to_json() const;
};

void write_run_manifest(const std::filesystem::path& path, const RunManifest& m);

// FNV-1a over the dataset's manifest.json bytes, as 16 hex digits. The
// dataset manifest pins clip membership and frame order, so a digest of it
// identifies the sequence structure without hashing every pixel.
std::string dataset_digest(const std::filesystem::path& root);

std::string iso8601_utc_now();
std::string tool_version();

}  // namespace wait
