#include "wait/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "wait/common.hpp"
#include "wait/ops.hpp"

namespace wait::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_file_name(const std::string& clip_id, std::int64_t index) {
  std::ostringstream os;
  os << clip_id << "_" << std::setw(6) << std::setfill('0') << index << ".png";
  return os.str();
}

void check_unit_range(const Tensor& t, const char* who) {
  for (std::int64_t i = 0; i < t.numel(); ++i)
    if (!(t[i] >= -1.0 && t[i] <= 1.0))
      throw DataError(std::string(who) + ": values must lie in [-1,1]");
}

json sequences_to_json(const std::vector<FrameSequence>& seqs) {
  json arr = json::array();
  for (const auto& seq : seqs) {
    json frames = json::array();
    for (const auto& fr : seq.frames)
      frames.push_back({fr.path.filename().string(), fr.timestamp});
    arr.push_back({{"clip", seq.source_id}, {"stride", seq.stride}, {"frames", frames}});
  }
  return arr;
}

std::vector<FrameSequence> sequences_from_json(const json& arr, const fs::path& dir) {
  std::vector<FrameSequence> out;
  for (const auto& item : arr) {
    FrameSequence seq;
    seq.source_id = item.at("clip").get<std::string>();
    seq.stride = item.at("stride").get<int>();
    std::int64_t prev_ts = -1;
    for (const auto& fr : item.at("frames")) {
      FrameRef ref;
      ref.path = dir / fr.at(0).get<std::string>();
      ref.timestamp = fr.at(1).get<std::int64_t>();
      if (!fs::exists(ref.path))
        throw DataError("manifest references missing file: " + ref.path.string());
      if (ref.timestamp <= prev_ts)
        throw DataError("manifest timestamps not strictly increasing in clip " +
                        seq.source_id);
      prev_ts = ref.timestamp;
      seq.frames.push_back(std::move(ref));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

ImageSet scan_image_dir(const fs::path& dir) {
  ImageSet set;
  if (!fs::exists(dir)) return set;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && media::is_image_file(entry.path()))
      set.images.push_back(entry.path());
  std::sort(set.images.begin(), set.images.end());
  return set;
}

}  // namespace

const fs::path& ImageSet::sample(Rng& rng) const {
  if (images.empty()) throw DataError("cannot sample from an empty image set");
  return images[std::size_t(rng.uniform_int(0, std::int64_t(images.size()) - 1))];
}

TensorImage preprocess(const media::RawImage& img, int size) {
  if (img.empty()) throw DataError("preprocess: empty image");
  if (img.c != 1 && img.c != 3)
    throw DataError("preprocess: expected 1 or 3 channels, got " + std::to_string(img.c));
  if (size < 1) throw ConfigError("preprocess: size must be >= 1");

  Tensor raw({3, img.h, img.w});
  for (int ch = 0; ch < 3; ++ch) {
    const int src = img.c == 1 ? 0 : ch;
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) raw.at(ch, y, x) = double(img.at(y, x, src));
  }
  Tensor resized = ops::resize_bilinear(raw, size, size);
  for (std::int64_t i = 0; i < resized.numel(); ++i) resized[i] = resized[i] / 127.5 - 1.0;
  return resized;
}

TensorImage preprocess(const Tensor& chw, int size) {
  if (chw.shape().size() != 3 || chw.shape()[0] != 3)
    throw ShapeError("preprocess: want (3,H,W), got " + chw.shape_str());
  check_unit_range(chw, "preprocess");
  return ops::resize_bilinear(chw, size, size);
}

int sample_delta(int len, int t, int gap, Rng& rng) {
  if (gap < 1) throw ConfigError("sample_delta: gap must be >= 1");
  if (t < 0 || t >= len) throw DataError("sample_delta: t out of range");
  if (len < 2) throw DataError("sample_delta: sequence too short for an auxiliary frame");
  std::vector<int> valid;
  valid.reserve(std::size_t(2 * gap));
  for (int d = -gap; d <= gap; ++d)
    if (d != 0 && t + d >= 0 && t + d < len) valid.push_back(d);
  return valid[std::size_t(rng.uniform_int(0, std::int64_t(valid.size()) - 1))];
}

TensorImage load_frame(const FrameSequence& seq, int index, int size) {
  if (index < 0 || index >= seq.size())
    throw DataError("load_frame: index out of range in clip " + seq.source_id);
  return preprocess(media::read_image(seq.frames[std::size_t(index)].path), size);
}

FrameSample sample_frame_pair(const FrameSequence& seq, int t, int gap, Rng& rng, int size) {
  const int delta = sample_delta(seq.size(), t, gap, rng);
  FrameSample s;
  s.reference = load_frame(seq, t, size);
  s.auxiliary = load_frame(seq, t + delta, size);
  s.delta = delta;
  s.t = t;
  return s;
}

std::vector<std::pair<int, int>> consecutive_pair_indices(const FrameSequence& seq) {
  std::vector<std::pair<int, int>> out;
  if (seq.size() < 2) {
    std::fprintf(stderr, "warning: clip %s has %d frame(s), no consecutive pairs\n",
                 seq.source_id.c_str(), seq.size());
    return out;
  }
  out.reserve(std::size_t(seq.size() - 1));
  for (int t = 0; t + 1 < seq.size(); ++t) out.emplace_back(t, t + 1);
  return out;
}

FrameSequence extract_frames(const fs::path& source, int stride, const fs::path& cache_dir,
                             const std::string& clip_id) {
  if (stride < 1) throw ConfigError("extract_frames: stride must be >= 1");
  FrameSequence seq;
  seq.source_id = clip_id;
  seq.stride = stride;

  if (fs::is_directory(source)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(source))
      if (entry.is_regular_file() && media::is_image_file(entry.path()))
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    int ref_h = 0, ref_w = 0;
    for (std::size_t i = 0; i < files.size(); i += std::size_t(stride)) {
      media::RawImage probe;
      try {
        probe = media::read_image(files[i]);
      } catch (const DataError&) {
        std::fprintf(stderr, "warning: skipping undecodable frame %s\n",
                     files[i].string().c_str());
        continue;
      }
      if (ref_h == 0) {
        ref_h = probe.h;
        ref_w = probe.w;
      } else if (probe.h != ref_h || probe.w != ref_w) {
        std::fprintf(stderr, "warning: skipping %s (%dx%d differs from clip %dx%d)\n",
                     files[i].string().c_str(), probe.w, probe.h, ref_w, ref_h);
        continue;
      }
      seq.frames.push_back({files[i], std::int64_t(i)});
    }
  } else if (fs::is_regular_file(source)) {
    media::VideoReader reader(source);
    fs::create_directories(cache_dir);
    media::RawImage frame;
    std::int64_t index = 0;
    int ref_h = 0, ref_w = 0;
    while (reader.next(frame)) {
      if (index % stride == 0) {
        if (ref_h == 0) {
          ref_h = frame.h;
          ref_w = frame.w;
        } else if (frame.h != ref_h || frame.w != ref_w) {
          throw DataError("extract_frames: frame size changed mid-video in " +
                          source.string());
        }
        const fs::path out = cache_dir / frame_file_name(clip_id, index);
        media::write_image(out, frame);
        seq.frames.push_back({out, index});
      }
      ++index;
    }
  } else {
    throw DataError("extract_frames: source does not exist: " + source.string());
  }

  if (seq.frames.empty())
    throw DataError("extract_frames: no frames extracted from " + source.string());
  return seq;
}

void write_manifest(const DatasetRoot& ds) {
  json m;
  m["version"] = 1;
  m["splits"]["trainA"] = sequences_to_json(ds.train_source);
  m["splits"]["testA"] = sequences_to_json(ds.test_source);
  std::ofstream out(ds.root / "manifest.json");
  if (!out) throw DataError("cannot write manifest under " + ds.root.string());
  out << m.dump(2) << "\n";
}

DatasetRoot load_dataset_root(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing manifest: " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  DatasetRoot ds;
  ds.root = root;
  try {
    ds.train_source = sequences_from_json(m.at("splits").at("trainA"), root / "trainA");
    ds.test_source = sequences_from_json(m.at("splits").at("testA"), root / "testA");
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  ds.train_target = scan_image_dir(root / "trainB");
  ds.test_target = scan_image_dir(root / "testB");
  return ds;
}

}  // namespace wait::data
