#include "wait/metrics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "wait/common.hpp"
#include "wait/ops.hpp"
#include "wait/warp_ops.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature files assume a little-endian host");

namespace wait::metrics {

void FeatureStats::validate() const {
  if (mean.size() < 1) throw DataError("FeatureStats: empty mean");
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw ShapeError("FeatureStats: covariance is not DxD");
  if (sample_count < 2) throw DataError("FeatureStats: need at least 2 samples");
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) throw NumericError("FeatureStats: covariance asymmetric by " +
                                      std::to_string(asym));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("FeatureStats: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() < -1e-6)
    throw NumericError("FeatureStats: covariance not PSD (min eigenvalue " +
                       std::to_string(es.eigenvalues().minCoeff()) + ")");
}

FeatureAccumulator::FeatureAccumulator(int dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {
  if (dim < 1) throw ConfigError("FeatureAccumulator: dim must be >= 1");
}

void FeatureAccumulator::add(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size())
    throw ShapeError("FeatureAccumulator: feature dim mismatch");
  ++n_;
  const Eigen::VectorXd d_old = x - mean_;
  mean_ += d_old / double(n_);
  m2_.noalias() += d_old * (x - mean_).transpose();
}

FeatureStats FeatureAccumulator::finish() const {
  if (n_ < 2) throw DataError("FeatureAccumulator: need at least 2 samples");
  FeatureStats s;
  s.mean = mean_;
  s.covariance = (m2_ + m2_.transpose()) / (2.0 * double(n_ - 1));
  s.sample_count = n_;
  return s;
}

PixelFeatureExtractor::PixelFeatureExtractor(int grid) : grid_(grid) {
  if (grid < 1) throw ConfigError("PixelFeatureExtractor: grid must be >= 1");
}

std::string PixelFeatureExtractor::name() const {
  return "pixel" + std::to_string(grid_);
}

Eigen::VectorXd PixelFeatureExtractor::features(const Tensor& image) {
  if (image.rank() != 3 || image.shape()[0] != 3)
    throw ShapeError("PixelFeatureExtractor: want (3,H,W), got " + image.shape_str());
  const Tensor pooled = ops::resize_bilinear(image, grid_, grid_);
  Eigen::VectorXd out(dim());
  for (std::int64_t i = 0; i < pooled.numel(); ++i) out[i] = pooled[i];
  return out;
}

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name) {
  if (name.rfind("pixel", 0) == 0) {
    const std::string arg = name.substr(5);
    int grid = 8;
    if (!arg.empty()) {
      try {
        grid = std::stoi(arg);
      } catch (const std::exception&) {
        throw ConfigError("unknown feature extractor: " + name);
      }
    }
    return std::make_unique<PixelFeatureExtractor>(grid);
  }
  if (name == "inception-v3")
    throw ConfigError(
        "feature extractor 'inception-v3' needs the pretrained asset "
        "inception_v3_pool3 which is not bundled; export its 2048-d "
        "activations offline and pass them as a feature file (--features) "
        "instead");
  throw ConfigError("unknown feature extractor: " + name);
}

FeatureStats extract_features(const std::vector<Tensor>& images,
                              FeatureExtractor& extractor) {
  if (images.size() < 2) throw DataError("extract_features: need at least 2 images");
  FeatureAccumulator acc(extractor.dim());
  for (const Tensor& img : images) acc.add(extractor.features(img));
  return acc.finish();
}

namespace {
constexpr char kFeatureMagic[4] = {'W', 'F', 'T', 'R'};
}

void write_feature_file(const std::filesystem::path& path,
                        const std::vector<Eigen::VectorXd>& features) {
  if (features.empty()) throw DataError("write_feature_file: no features");
  const std::int32_t n = std::int32_t(features.size());
  const std::int32_t d = std::int32_t(features[0].size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file: " + path.string());
  out.write(kFeatureMagic, 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  for (const auto& f : features) {
    if (f.size() != d) throw ShapeError("write_feature_file: ragged feature rows");
    out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(d) * 8);
  }
  if (!out) throw DataError("short write to feature file: " + path.string());
}

std::vector<Eigen::VectorXd> read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path.string());
  char magic[4];
  std::int32_t n = 0, d = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw DataError("not a feature file (bad magic): " + path.string());
  if (n < 1 || d < 1 || std::int64_t(n) * d > (1ll << 31))
    throw DataError("implausible feature file header: " + path.string());
  std::vector<Eigen::VectorXd> out;
  out.assign(std::size_t(n), Eigen::VectorXd(d));
  for (auto& f : out) {
    in.read(reinterpret_cast<char*>(f.data()), std::streamsize(d) * 8);
    if (!in) throw DataError("truncated feature file: " + path.string());
  }
  return out;
}

FeatureStats stats_from_features(const std::vector<Eigen::VectorXd>& features) {
  if (features.size() < 2) throw DataError("stats_from_features: need at least 2 rows");
  FeatureAccumulator acc(int(features[0].size()));
  for (const auto& f : features) acc.add(f);
  return acc.finish();
}

double fid(const FeatureStats& real, const FeatureStats& fake) {
  real.validate();
  fake.validate();
  if (real.dim() != fake.dim())
    throw ShapeError("fid: dimension mismatch, " + std::to_string(real.dim()) + " vs " +
                     std::to_string(fake.dim()));
  const int d = real.dim();
  const double eps = 1e-6;
  const Eigen::MatrixXd ar =
      real.covariance + eps * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd af =
      fake.covariance + eps * Eigen::MatrixXd::Identity(d, d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_r(ar);
  if (es_r.info() != Eigen::Success)
    throw NumericError("fid: eigendecomposition of real covariance failed");
  const Eigen::VectorXd lam = es_r.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd sqrt_ar = es_r.eigenvectors() *
                                  lam.cwiseSqrt().asDiagonal() *
                                  es_r.eigenvectors().transpose();

  Eigen::MatrixXd s = sqrt_ar * af * sqrt_ar;
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(s, Eigen::EigenvaluesOnly);
  if (es_s.info() != Eigen::Success)
    throw NumericError("fid: matrix square root did not converge");
  Eigen::VectorXd mu = es_s.eigenvalues();
  const double mu_max = mu.cwiseAbs().maxCoeff();
  for (int i = 0; i < mu.size(); ++i) {
    if (mu[i] < 0.0) {
      if (mu_max > 0.0 && -mu[i] > 1e-3 * mu_max)
        throw NumericError("fid: matrix square root residue too large (" +
                           std::to_string(-mu[i] / mu_max) + " relative)");
      mu[i] = 0.0;
    }
  }
  const double tr_sqrt = mu.cwiseSqrt().sum();
  return (real.mean - fake.mean).squaredNorm() + ar.trace() + af.trace() -
         2.0 * tr_sqrt;
}

void StylizedSequence::validate() const {
  if (frames.size() < 2) throw DataError("StylizedSequence: need at least 2 frames");
  const std::size_t t = frames.size();
  if (flows.size() != t - 1 || masks.size() != t - 1)
    throw DataError("StylizedSequence: want T-1 flows and masks, have " +
                    std::to_string(flows.size()) + "/" + std::to_string(masks.size()) +
                    " for T=" + std::to_string(t));
  if (!inputs.empty() && inputs.size() != t)
    throw DataError("StylizedSequence: inputs/frames count mismatch");
  const int h = frames[0].shape()[1], w = frames[0].shape()[2];
  for (const Tensor& f : frames)
    if (f.rank() != 3 || f.shape()[0] != 3 || f.shape()[1] != h || f.shape()[2] != w)
      throw ShapeError("StylizedSequence: inconsistent frame shape " + f.shape_str());
  for (const Tensor& f : flows)
    if (f.rank() != 3 || f.shape()[0] != 2 || f.shape()[1] != h || f.shape()[2] != w)
      throw ShapeError("StylizedSequence: flow shape " + f.shape_str());
  for (const Tensor& m : masks)
    if (m.rank() != 2 || m.shape()[0] != h || m.shape()[1] != w)
      throw ShapeError("StylizedSequence: mask shape " + m.shape_str());
}

double flow_warping_error(const StylizedSequence& seq) {
  seq.validate();
  const int t_count = int(seq.frames.size());
  const int h = seq.frames[0].shape()[1], w = seq.frames[0].shape()[2];

  auto to_unit = [](const Tensor& x) {
    Tensor out = x;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = (out[i] + 1.0) * 0.5;
    return out;
  };

  double total = 0.0;
  int pairs = 0;
  for (int t = 1; t < t_count; ++t) {
    const Tensor& mask = seq.masks[std::size_t(t - 1)];
    std::int64_t valid = 0;
    for (std::int64_t i = 0; i < mask.numel(); ++i)
      if (mask[i] > 0.5) ++valid;
    if (valid == 0) continue;

    const Tensor y = to_unit(seq.frames[std::size_t(t)]);
    const Tensor prev = to_unit(seq.frames[std::size_t(t - 1)]);
    const Tensor warped = ops::flow_warp_forward(prev, seq.flows[std::size_t(t - 1)]);

    double s = 0.0;
    for (int c = 0; c < 3; ++c)
      for (int y_i = 0; y_i < h; ++y_i)
        for (int x_i = 0; x_i < w; ++x_i) {
          if (mask.at(y_i, x_i) <= 0.5) continue;
          const double diff = y.at(c, y_i, x_i) - warped.at(c, y_i, x_i);
          s += diff * diff;
        }
    total += s / (double(valid) * 3.0);
    ++pairs;
  }
  return pairs > 0 ? total / double(pairs) : 0.0;
}

double temporal_mse(const std::vector<Tensor>& inputs, const std::vector<Tensor>& outputs) {
  if (inputs.size() != outputs.size())
    throw DataError("temporal_mse: sequence length mismatch");
  if (inputs.size() < 2) throw DataError("temporal_mse: need at least 2 frames");
  for (std::size_t t = 0; t < inputs.size(); ++t)
    if (!inputs[t].same_shape(outputs[t]) || !inputs[t].same_shape(inputs[0]))
      throw ShapeError("temporal_mse: inconsistent frame shapes");

  double total = 0.0;
  for (std::size_t t = 0; t + 1 < inputs.size(); ++t) {
    const Tensor& x0 = inputs[t];
    const Tensor& x1 = inputs[t + 1];
    const Tensor& y0 = outputs[t];
    const Tensor& y1 = outputs[t + 1];
    double s = 0.0;
    for (std::int64_t i = 0; i < x0.numel(); ++i) {
      // [-1,1] -> [0,255] is affine, so only the 127.5 slope survives the
      // temporal differences.
      const double d = 127.5 * ((x1[i] - x0[i]) - (y1[i] - y0[i]));
      s += d * d;
    }
    total += s;
  }
  return total / double(inputs.size() - 1);
}

}  // namespace wait::metrics
