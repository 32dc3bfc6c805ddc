#include "wait/media.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "wait/common.hpp"

namespace wait::media {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return e;
}

RawImage from_mat(const cv::Mat& m) {
  cv::Mat u8;
  if (m.depth() == CV_8U)
    u8 = m;
  else if (m.depth() == CV_16U)
    m.convertTo(u8, CV_8U, 255.0 / 65535.0);
  else
    m.convertTo(u8, CV_8U);

  cv::Mat rgb;
  switch (u8.channels()) {
    case 1: rgb = u8; break;
    case 3: cv::cvtColor(u8, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(u8, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw DataError("unsupported channel count: " + std::to_string(u8.channels()));
  }

  RawImage out;
  out.h = rgb.rows;
  out.w = rgb.cols;
  out.c = rgb.channels();
  out.pixels.resize(std::size_t(out.h) * out.w * out.c);
  for (int y = 0; y < out.h; ++y)
    std::copy_n(rgb.ptr<std::uint8_t>(y), std::size_t(out.w) * out.c,
                out.pixels.data() + std::size_t(y) * out.w * out.c);
  return out;
}

cv::Mat to_bgr_mat(const RawImage& img) {
  if (img.empty() || (img.c != 1 && img.c != 3))
    throw DataError("write_image: image must be nonempty with 1 or 3 channels");
  cv::Mat m(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.h; ++y)
    std::copy_n(img.pixels.data() + std::size_t(y) * img.w * img.c,
                std::size_t(img.w) * img.c, m.ptr<std::uint8_t>(y));
  if (img.c == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  return m;
}

}  // namespace

bool is_image_file(const std::filesystem::path& p) {
  static const char* kExts[] = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm"};
  const std::string e = lower_ext(p);
  return std::find(std::begin(kExts), std::end(kExts), e) != std::end(kExts);
}

bool is_video_file(const std::filesystem::path& p) {
  static const char* kExts[] = {".avi", ".mp4", ".mov", ".mkv", ".webm"};
  const std::string e = lower_ext(p);
  return std::find(std::begin(kExts), std::end(kExts), e) != std::end(kExts);
}

RawImage read_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot decode image: " + path.string());
  return from_mat(m);
}

void write_image(const std::filesystem::path& path, const RawImage& img) {
  if (!cv::imwrite(path.string(), to_bgr_mat(img)))
    throw DataError("cannot write image: " + path.string());
}

RawImage from_unit_tensor(const Tensor& chw) {
  if (chw.shape().size() != 3 || chw.shape()[0] != 3)
    throw ShapeError("from_unit_tensor: want (3,H,W), got " + chw.shape_str());
  const int h = chw.shape()[1], w = chw.shape()[2];
  RawImage out;
  out.h = h;
  out.w = w;
  out.c = 3;
  out.pixels.resize(std::size_t(h) * w * 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = std::clamp(chw.at(c, y, x), -1.0, 1.0);
        out.pixels[std::size_t(y * w + x) * 3 + c] =
            std::uint8_t(std::lround((v + 1.0) * 127.5));
      }
  return out;
}

void write_unit_tensor(const std::filesystem::path& path, const Tensor& chw) {
  write_image(path, from_unit_tensor(chw));
}

struct VideoReader::Impl {
  cv::VideoCapture cap;
};

VideoReader::VideoReader(const std::filesystem::path& path) : impl_(new Impl) {
  if (!impl_->cap.open(path.string()))
    throw DataError("cannot open video (no decodable backend?): " + path.string());
}

VideoReader::~VideoReader() = default;

bool VideoReader::next(RawImage& out) {
  cv::Mat frame;
  if (!impl_->cap.read(frame) || frame.empty()) return false;
  out = from_mat(frame);
  return true;
}

struct VideoWriter::Impl {
  cv::VideoWriter writer;
};

VideoWriter::VideoWriter(const std::filesystem::path& path, int w, int h, double fps)
    : impl_(new Impl) {
  const int fourcc = cv::VideoWriter::fourcc('M', 'J', 'P', 'G');
  if (!impl_->writer.open(path.string(), fourcc, fps, cv::Size(w, h), true))
    throw DataError("cannot open video for writing: " + path.string());
}

VideoWriter::~VideoWriter() = default;

void VideoWriter::write(const RawImage& frame) {
  impl_->writer.write(to_bgr_mat(frame));
}

}  // namespace wait::media
