#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wait/tensor.hpp"

namespace wait::metrics {

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::int64_t sample_count = 0;
  int dim() const { return int(mean.size()); }
  // Symmetric within 1e-8, eigenvalues >= -1e-6, sample_count >= 2.
  void validate() const;
};

// Streaming Welford accumulation in double precision; finish() produces the
// unbiased (N-1) covariance, symmetrized.
class FeatureAccumulator {
 public:
  explicit FeatureAccumulator(int dim);
  void add(const Eigen::VectorXd& x);
  std::int64_t count() const { return n_; }
  FeatureStats finish() const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  std::int64_t n_ = 0;
};

// Maps a (3,H,W) image in [-1,1] to a feature vector.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual Eigen::VectorXd features(const Tensor& image) = 0;
};

// Builtin extractor: bilinear-pooled color grid, D = 3*grid*grid. Needs no
// external weights, so FID over these features runs anywhere; scores are not
// comparable with ones from a pretrained network.
class PixelFeatureExtractor : public FeatureExtractor {
 public:
  explicit PixelFeatureExtractor(int grid = 8);
  int dim() const override { return 3 * grid_ * grid_; }
  std::string name() const override;
  Eigen::VectorXd features(const Tensor& image) override;

 private:
  int grid_;
};

// "pixel<g>" builds the builtin extractor. The 2048-d pretrained reference
// network is never reimplemented here; requesting it reports the missing
// asset and points at the feature-file path instead.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& name);

FeatureStats extract_features(const std::vector<Tensor>& images, FeatureExtractor& extractor);

// Activation dumps produced offline by any framework: magic "WFTR", int32 n,
// int32 d, then n*d float64 row-major, little-endian.
void write_feature_file(const std::filesystem::path& path,
                        const std::vector<Eigen::VectorXd>& features);
std::vector<Eigen::VectorXd> read_feature_file(const std::filesystem::path& path);
FeatureStats stats_from_features(const std::vector<Eigen::VectorXd>& features);

// ||m_r - m_f||^2 + tr(C_r + C_f - 2 (C_r C_f)^{1/2}), both covariances
// regularized with 1e-6 I. The square root is taken through the symmetric
// sandwich sqrt(A_r)^T A_f sqrt(A_r); its negative eigenvalues play the role
// of the imaginary residue in a complex sqrtm: below 1e-3 relative they are
// discarded, above they raise NumericError.
double fid(const FeatureStats& real, const FeatureStats& fake);

// frames[t] are stylized outputs y_t in [-1,1]. flows[k] and masks[k] belong
// to the pair (k, k+1): both live on frame k+1's grid, the flow points into
// frame k (backward-warp convention), mask 1 = non-occluded. inputs may stay
// empty; the error uses only stylized frames.
struct StylizedSequence {
  std::vector<Tensor> inputs;
  std::vector<Tensor> frames;
  std::vector<Tensor> flows;
  std::vector<Tensor> masks;
  void validate() const;
};

// Mean over frame pairs of the masked squared color difference between y_t
// and the previous stylized frame warped into its geometry, on [0,1] scale,
// normalized per pair by (unmasked pixels x 3). Fully-masked pairs drop out
// of the average entirely.
double flow_warping_error(const StylizedSequence& seq);

// (1/(T-1)) sum_t ||(x_{t+1}-x_t) - (y_{t+1}-y_t)||^2 summed over pixels and
// channels on 8-bit [0,255] scale.
double temporal_mse(const std::vector<Tensor>& inputs, const std::vector<Tensor>& outputs);

}  // namespace wait::metrics
