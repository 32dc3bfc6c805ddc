#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wait/generators.hpp"
#include "wait/losses.hpp"

namespace wait {

enum class Variant {
  kCycleGan,
  kCycleGanTemp,
  kOpticalFlowWarp,
  kRecycleGan,
  kRecycleGanV2,
  kWait,
};

const char* to_string(Variant v);
Variant variant_from_string(const std::string& name);  // ConfigError lists valid names
const std::vector<std::string>& variant_names();

enum class LrPolicy { kLinear, kConstant };

// The resolved run configuration. Serialized as flat YAML (plus a nested
// `weights` map); parsing rejects unknown keys so a typo in a sweep file
// fails loudly instead of silently training the default.
struct VariantConfig {
  Variant variant = Variant::kWait;
  int time_gap = 2;
  GeneratorSpec generator;  // image_size / base_channels / offset_depth / ...
  losses::LossWeights weights;
  losses::GanMode gan_mode = losses::GanMode::kLeastSquares;
  double lr = 0.0008;
  LrPolicy lr_policy = LrPolicy::kLinear;
  int batch_size = 8;
  int epochs = 200;
  int checkpoint_every = 10;
  int pool_capacity = 50;
  std::uint64_t seed = 1;
  std::string dataset;   // dataset root directory
  std::string flow_dir;  // precomputed flows, required for optical_flow_warp

  void validate() const;

  // Canonical description of everything that shapes parameters; its FNV-1a
  // hash gates checkpoint loading.
  std::string arch_string() const;
  std::uint64_t arch_hash() const;
};

bool operator==(const VariantConfig& a, const VariantConfig& b);
inline bool operator!=(const VariantConfig& a, const VariantConfig& b) { return !(a == b); }

VariantConfig config_from_yaml(const std::string& text);
std::string config_to_yaml(const VariantConfig& cfg);
VariantConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const VariantConfig& cfg);

}  // namespace wait
