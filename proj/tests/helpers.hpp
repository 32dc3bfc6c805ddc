#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "wait/rng.hpp"
#include "wait/tensor.hpp"

namespace testing_util {

// Unique scratch directory, removed on scope exit.
struct TmpDir {
  std::filesystem::path path;
  explicit TmpDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TmpDir(const TmpDir&) = delete;
  TmpDir& operator=(const TmpDir&) = delete;
};

inline wait::Tensor rand_tensor(std::vector<int> shape, wait::Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  wait::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Random values bounded away from zero, for ops with a kink at the origin.
inline wait::Tensor rand_tensor_away_from_zero(std::vector<int> shape, wait::Rng& rng,
                                               double min_mag = 0.1, double max_mag = 1.0) {
  wait::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const double mag = rng.uniform(min_mag, max_mag);
    t[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

}  // namespace testing_util
