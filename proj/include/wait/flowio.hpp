#pragma once

#include <filesystem>

#include "wait/tensor.hpp"

namespace wait::flowio {

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
// H*W interleaved (u,v) float32 pairs, row-major, little-endian. Returned as
// a (2,H,W) tensor, channel 0 = u (x displacement), channel 1 = v.
Tensor read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const Tensor& flow);

// read_flo followed by bilinear resize to (2,size,size) with the displacement
// vectors rescaled to the new grid. A flow already at the target size passes
// through untouched.
Tensor read_flo_resized(const std::filesystem::path& path, int size);

}  // namespace wait::flowio
