#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "wait/tensor.hpp"

namespace wait::media {

// 8-bit interleaved pixels, RGB when c == 3, single plane when c == 1.
struct RawImage {
  int h = 0, w = 0, c = 0;
  std::vector<std::uint8_t> pixels;
  bool empty() const { return h <= 0 || w <= 0; }
  std::uint8_t at(int y, int x, int ch) const {
    return pixels[std::size_t(y * w + x) * c + ch];
  }
};

bool is_image_file(const std::filesystem::path& p);
bool is_video_file(const std::filesystem::path& p);

RawImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const RawImage& img);

// (3,H,W) in [-1,1] -> 8-bit RGB, round-to-nearest with clamping.
RawImage from_unit_tensor(const Tensor& chw);
void write_unit_tensor(const std::filesystem::path& path, const Tensor& chw);

// Streaming decode. Which containers open depends on the OpenCV backends
// present at run time; MJPEG avi is the one the built-in reader always
// handles, so it is what the sample data and tests use.
class VideoReader {
 public:
  explicit VideoReader(const std::filesystem::path& path);
  ~VideoReader();
  bool next(RawImage& out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class VideoWriter {
 public:
  VideoWriter(const std::filesystem::path& path, int w, int h, double fps = 24.0);
  ~VideoWriter();
  void write(const RawImage& frame);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace wait::media
