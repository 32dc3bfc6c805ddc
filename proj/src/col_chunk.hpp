#pragma once

#include <algorithm>
#include <cstdint>

#include "wait/ops.hpp"

namespace wait::ops {

// im2col-style buffers are processed in column chunks so a single conv never
// materializes more than the budget (a 7x7 conv over 320 channels at 256x256
// would otherwise need an 8GB buffer). Budget lives behind
// conv_col_budget_bytes() as a test seam.
inline std::int64_t col_chunk_cols(std::int64_t rows, std::int64_t cols) {
  const std::int64_t by_budget =
      conv_col_budget_bytes() / (8 * std::max<std::int64_t>(rows, 1));
  return std::clamp<std::int64_t>(by_budget, 1, std::max<std::int64_t>(cols, 1));
}

}  // namespace wait::ops
