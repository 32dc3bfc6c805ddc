#include "wait/flowio.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

#include "wait/common.hpp"
#include "wait/ops.hpp"

static_assert(std::endian::native == std::endian::little,
              ".flo I/O assumes a little-endian host");

namespace wait::flowio {

namespace {
constexpr float kFloMagic = 202021.25f;
}

Tensor read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open flow file: " + path.string());
  float magic = 0.0f;
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || magic != kFloMagic)
    throw DataError("not a .flo file (bad magic): " + path.string());
  if (w < 1 || h < 1 || std::int64_t(w) * h > (1ll << 28))
    throw DataError("implausible .flo dimensions in " + path.string());

  std::vector<float> row(std::size_t(w) * 2);
  Tensor flow({2, h, w});
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()) * 4);
    if (!in) throw DataError("truncated .flo payload: " + path.string());
    for (int x = 0; x < w; ++x) {
      flow.at(0, y, x) = double(row[std::size_t(x) * 2]);
      flow.at(1, y, x) = double(row[std::size_t(x) * 2 + 1]);
    }
  }
  return flow;
}

void write_flo(const std::filesystem::path& path, const Tensor& flow) {
  if (flow.rank() != 3 || flow.shape()[0] != 2)
    throw ShapeError("write_flo: want (2,H,W), got " + flow.shape_str());
  const std::int32_t h = flow.shape()[1], w = flow.shape()[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write flow file: " + path.string());
  out.write(reinterpret_cast<const char*>(&kFloMagic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(std::size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[std::size_t(x) * 2] = float(flow.at(0, y, x));
      row[std::size_t(x) * 2 + 1] = float(flow.at(1, y, x));
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()) * 4);
  }
  if (!out) throw DataError("short write to flow file: " + path.string());
}

Tensor read_flo_resized(const std::filesystem::path& path, int size) {
  Tensor f = read_flo(path);
  if (f.dim(1) == size && f.dim(2) == size) return f;
  const double sx = double(size) / f.dim(2);
  const double sy = double(size) / f.dim(1);
  f = ops::resize_bilinear(f, size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      f.at(0, y, x) *= sx;
      f.at(1, y, x) *= sy;
    }
  return f;
}

}  // namespace wait::flowio
