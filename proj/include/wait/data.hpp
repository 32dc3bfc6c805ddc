#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wait/media.hpp"
#include "wait/rng.hpp"
#include "wait/tensor.hpp"

namespace wait::data {

// Image as a (3,H,W) tensor with entries in [-1,1].
using TensorImage = Tensor;

struct FrameRef {
  std::filesystem::path path;
  std::int64_t timestamp = 0;  // source frame number, before striding
};

// One clip. Frames live on disk; timestamps strictly increase.
struct FrameSequence {
  std::string source_id;
  int stride = 1;
  std::vector<FrameRef> frames;
  int size() const { return int(frames.size()); }
};

// Unordered image collection (the target domain).
struct ImageSet {
  std::vector<std::filesystem::path> images;
  const std::filesystem::path& sample(Rng& rng) const;
};

struct FrameSample {
  TensorImage reference;
  TensorImage auxiliary;
  int delta = 0;
  int t = 0;
};

TensorImage preprocess(const media::RawImage& img, int size);
// Tensor path: input must already be (3,H,W) in [-1,1]; only resizes, so
// preprocess(preprocess(x, s), s) == preprocess(x, s).
TensorImage preprocess(const Tensor& chw, int size);

// delta ~ uniform over {-gap..gap}\{0} restricted to values that keep
// t+delta inside [0, len).
int sample_delta(int len, int t, int gap, Rng& rng);

FrameSample sample_frame_pair(const FrameSequence& seq, int t, int gap, Rng& rng, int size);

TensorImage load_frame(const FrameSequence& seq, int index, int size);

// (t, t+1) index pairs within one clip; empty plus a stderr warning when the
// clip has fewer than two frames. Pairs never span clips because a
// FrameSequence is a single clip by construction.
std::vector<std::pair<int, int>> consecutive_pair_indices(const FrameSequence& seq);

// source is a video file or a directory of ordered images. Keeps frames
// 0, stride, 2*stride, ... Video frames are materialized under cache_dir as
// <clip_id>_<index>.png (handles must outlive the decoder); directory frames
// are referenced in place.
FrameSequence extract_frames(const std::filesystem::path& source, int stride,
                             const std::filesystem::path& cache_dir,
                             const std::string& clip_id);

// Root layout: trainA/ testA/ hold ordered source clips (<clip>_<frame>.png),
// trainB/ testB/ hold unordered target images, manifest.json records clip
// membership and frame order so nothing depends on filesystem sort quirks.
struct DatasetRoot {
  std::filesystem::path root;
  std::vector<FrameSequence> train_source;
  std::vector<FrameSequence> test_source;
  ImageSet train_target;
  ImageSet test_target;
};

void write_manifest(const DatasetRoot& ds);
DatasetRoot load_dataset_root(const std::filesystem::path& root);

}  // namespace wait::data
