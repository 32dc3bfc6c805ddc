#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wait/tensor.hpp"

namespace wait {

// On-disk training snapshot. Binary layout (little-endian):
//   8-byte magic "WAITCKP1", u32 version, u64 arch_hash, u32 epoch,
//   u64 config length + config text (the resolved VariantConfig, so a
//   checkpoint is self-describing), u32 tensor count, then per tensor:
//   u32 name length + name, u32 rank, i32 dims, f64 payload.
// Deliberately no timestamps or hostnames: identical runs must produce
// bitwise-identical files.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t arch_hash = 0;
  std::uint32_t epoch = 0;  // completed epochs
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace wait
