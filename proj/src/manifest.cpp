#include "wait/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wait/common.hpp"

namespace fs = std::filesystem;

namespace wait {

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["config"] = config_yaml;
  j["dataset_digests"] = nlohmann::ordered_json::object();
  for (const auto& [root, digest] : dataset_digests) j["dataset_digests"][root] = digest;
  j["outputs"] = outputs;
  j["notes"] = notes;
  return j.dump(2) + "\n";
}

void write_run_manifest(const fs::path& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write run manifest: " + path.string());
  out << m.to_json();
  if (!out) throw DataError("short write to run manifest: " + path.string());
}

std::string dataset_digest(const fs::path& root) {
  const fs::path manifest = root / "manifest.json";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw DataError("dataset has no manifest.json: " + root.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(buf.str())));
  return hex;
}

std::string iso8601_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string tool_version() {
#ifdef WAIT_VERSION
  return WAIT_VERSION;
#else
  return "wait (unversioned build)";
#endif
}

}  // namespace wait
