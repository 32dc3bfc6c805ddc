#include "wait/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "wait/common.hpp"

namespace wait {

namespace {

struct VariantName {
  Variant v;
  const char* name;
};

constexpr VariantName kVariants[] = {
    {Variant::kCycleGan, "cyclegan"},
    {Variant::kCycleGanTemp, "cyclegan_temp"},
    {Variant::kOpticalFlowWarp, "optical_flow_warp"},
    {Variant::kRecycleGan, "recyclegan"},
    {Variant::kRecycleGanV2, "recycleganv2"},
    {Variant::kWait, "wait"},
};

std::string joined_variant_names() {
  std::string out;
  for (const auto& vn : kVariants) {
    if (!out.empty()) out += ", ";
    out += vn.name;
  }
  return out;
}

template <typename T>
void read_key(const YAML::Node& node, const char* key, T& out) {
  if (const YAML::Node v = node[key]) {
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(std::string("config: bad value for key '") + key + "'");
    }
  }
}

void reject_unknown(const YAML::Node& node, const std::set<std::string>& known,
                    const std::string& scope) {
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!known.count(key))
      throw ConfigError("config: unknown key '" + scope + key + "'");
  }
}

}  // namespace

const char* to_string(Variant v) {
  for (const auto& vn : kVariants)
    if (vn.v == v) return vn.name;
  return "?";
}

Variant variant_from_string(const std::string& name) {
  for (const auto& vn : kVariants)
    if (name == vn.name) return vn.v;
  throw ConfigError("unknown variant '" + name + "' (valid: " + joined_variant_names() + ")");
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& vn : kVariants) out.emplace_back(vn.name);
    return out;
  }();
  return names;
}

void VariantConfig::validate() const {
  generator.validate();
  if (time_gap < 1) throw ConfigError("config: time_gap must be >= 1");
  if (lr <= 0.0) throw ConfigError("config: lr must be > 0");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("config: checkpoint_every must be >= 1");
  if (pool_capacity < 0) throw ConfigError("config: pool_capacity must be >= 0");
  if (variant == Variant::kOpticalFlowWarp && flow_dir.empty())
    throw ConfigError("config: variant optical_flow_warp requires flow_dir");
}

std::string VariantConfig::arch_string() const {
  std::ostringstream os;
  os << "variant=" << to_string(variant) << ";image=" << generator.image_size
     << ";in=" << generator.in_channels << ";base=" << generator.base_channels
     << ";res=" << generator.residual_blocks << ";offset_depth=" << generator.offset_depth
     << ";offset_residual=" << (generator.offset_residual ? 1 : 0)
     << ";warp=" << generator.num_warping_layers << ";dilations=";
  for (std::size_t i = 0; i < generator.dilations.size(); ++i) {
    if (i) os << ',';
    os << generator.dilations[i];
  }
  return os.str();
}

std::uint64_t VariantConfig::arch_hash() const { return fnv1a64(arch_string()); }

bool operator==(const VariantConfig& a, const VariantConfig& b) {
  return a.variant == b.variant && a.time_gap == b.time_gap &&
         a.generator.image_size == b.generator.image_size &&
         a.generator.in_channels == b.generator.in_channels &&
         a.generator.base_channels == b.generator.base_channels &&
         a.generator.residual_blocks == b.generator.residual_blocks &&
         a.generator.offset_depth == b.generator.offset_depth &&
         a.generator.offset_residual == b.generator.offset_residual &&
         a.generator.num_warping_layers == b.generator.num_warping_layers &&
         a.generator.dilations == b.generator.dilations &&
         a.weights.cycle == b.weights.cycle && a.weights.identity == b.weights.identity &&
         a.weights.temp_diff == b.weights.temp_diff &&
         a.weights.flow_warp == b.weights.flow_warp &&
         a.weights.recurrent == b.weights.recurrent && a.weights.recycle == b.weights.recycle &&
         a.gan_mode == b.gan_mode && a.lr == b.lr && a.lr_policy == b.lr_policy &&
         a.batch_size == b.batch_size && a.epochs == b.epochs &&
         a.checkpoint_every == b.checkpoint_every && a.pool_capacity == b.pool_capacity &&
         a.seed == b.seed && a.dataset == b.dataset && a.flow_dir == b.flow_dir;
}

VariantConfig config_from_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: malformed YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");

  static const std::set<std::string> kKnown = {
      "variant",        "time_gap",   "image_size",        "base_channels",
      "residual_blocks", "offset_depth", "offset_residual", "num_warping_layers",
      "dilations",      "weights",    "gan_mode",          "lr",
      "lr_policy",      "batch_size", "epochs",            "checkpoint_every",
      "pool_capacity",  "seed",       "dataset",           "flow_dir",
  };
  reject_unknown(root, kKnown, "");

  VariantConfig cfg;
  if (const YAML::Node v = root["variant"]) cfg.variant = variant_from_string(v.as<std::string>());
  read_key(root, "time_gap", cfg.time_gap);
  read_key(root, "image_size", cfg.generator.image_size);
  read_key(root, "base_channels", cfg.generator.base_channels);
  read_key(root, "residual_blocks", cfg.generator.residual_blocks);
  read_key(root, "offset_depth", cfg.generator.offset_depth);
  read_key(root, "offset_residual", cfg.generator.offset_residual);
  read_key(root, "num_warping_layers", cfg.generator.num_warping_layers);
  read_key(root, "dilations", cfg.generator.dilations);

  if (const YAML::Node w = root["weights"]) {
    if (!w.IsMap()) throw ConfigError("config: weights must be a mapping");
    static const std::set<std::string> kWeightKeys = {"cycle",     "identity",  "temp_diff",
                                                      "flow_warp", "recurrent", "recycle"};
    reject_unknown(w, kWeightKeys, "weights.");
    read_key(w, "cycle", cfg.weights.cycle);
    read_key(w, "identity", cfg.weights.identity);
    read_key(w, "temp_diff", cfg.weights.temp_diff);
    read_key(w, "flow_warp", cfg.weights.flow_warp);
    read_key(w, "recurrent", cfg.weights.recurrent);
    read_key(w, "recycle", cfg.weights.recycle);
  }

  if (const YAML::Node m = root["gan_mode"]) {
    const std::string s = m.as<std::string>();
    if (s == "least_squares")
      cfg.gan_mode = losses::GanMode::kLeastSquares;
    else if (s == "logistic")
      cfg.gan_mode = losses::GanMode::kLogistic;
    else
      throw ConfigError("config: gan_mode must be least_squares or logistic");
  }
  if (const YAML::Node p = root["lr_policy"]) {
    const std::string s = p.as<std::string>();
    if (s == "linear")
      cfg.lr_policy = LrPolicy::kLinear;
    else if (s == "constant")
      cfg.lr_policy = LrPolicy::kConstant;
    else
      throw ConfigError("config: lr_policy must be linear or constant");
  }
  read_key(root, "lr", cfg.lr);
  read_key(root, "batch_size", cfg.batch_size);
  read_key(root, "epochs", cfg.epochs);
  read_key(root, "checkpoint_every", cfg.checkpoint_every);
  read_key(root, "pool_capacity", cfg.pool_capacity);
  read_key(root, "seed", cfg.seed);
  read_key(root, "dataset", cfg.dataset);
  read_key(root, "flow_dir", cfg.flow_dir);

  cfg.validate();
  return cfg;
}

std::string config_to_yaml(const VariantConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "variant" << YAML::Value << to_string(cfg.variant);
  out << YAML::Key << "time_gap" << YAML::Value << cfg.time_gap;
  out << YAML::Key << "image_size" << YAML::Value << cfg.generator.image_size;
  out << YAML::Key << "base_channels" << YAML::Value << cfg.generator.base_channels;
  out << YAML::Key << "residual_blocks" << YAML::Value << cfg.generator.residual_blocks;
  out << YAML::Key << "offset_depth" << YAML::Value << cfg.generator.offset_depth;
  out << YAML::Key << "offset_residual" << YAML::Value << cfg.generator.offset_residual;
  out << YAML::Key << "num_warping_layers" << YAML::Value << cfg.generator.num_warping_layers;
  out << YAML::Key << "dilations" << YAML::Value << YAML::Flow << cfg.generator.dilations;
  out << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "cycle" << YAML::Value << cfg.weights.cycle;
  out << YAML::Key << "identity" << YAML::Value << cfg.weights.identity;
  out << YAML::Key << "temp_diff" << YAML::Value << cfg.weights.temp_diff;
  out << YAML::Key << "flow_warp" << YAML::Value << cfg.weights.flow_warp;
  out << YAML::Key << "recurrent" << YAML::Value << cfg.weights.recurrent;
  out << YAML::Key << "recycle" << YAML::Value << cfg.weights.recycle;
  out << YAML::EndMap;
  out << YAML::Key << "gan_mode" << YAML::Value
      << (cfg.gan_mode == losses::GanMode::kLeastSquares ? "least_squares" : "logistic");
  out << YAML::Key << "lr" << YAML::Value << cfg.lr;
  out << YAML::Key << "lr_policy" << YAML::Value
      << (cfg.lr_policy == LrPolicy::kLinear ? "linear" : "constant");
  out << YAML::Key << "batch_size" << YAML::Value << cfg.batch_size;
  out << YAML::Key << "epochs" << YAML::Value << cfg.epochs;
  out << YAML::Key << "checkpoint_every" << YAML::Value << cfg.checkpoint_every;
  out << YAML::Key << "pool_capacity" << YAML::Value << cfg.pool_capacity;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "dataset" << YAML::Value << cfg.dataset;
  out << YAML::Key << "flow_dir" << YAML::Value << cfg.flow_dir;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

VariantConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_yaml(buf.str());
}

void save_config(const std::filesystem::path& path, const VariantConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << config_to_yaml(cfg);
  if (!out) throw ConfigError("config write failed: " + path.string());
}

}  // namespace wait
