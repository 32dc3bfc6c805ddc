#include "wait/evaluate.hpp"

#include <algorithm>
#include <utility>

#include <json.hpp>

#include "wait/autograd.hpp"
#include "wait/common.hpp"
#include "wait/flowio.hpp"
#include "wait/media.hpp"
#include "wait/metrics.hpp"
#include "wait/trainer.hpp"
#include "wait/warp_ops.hpp"

namespace fs = std::filesystem;

namespace wait {
namespace {

Tensor unsqueeze0(const Tensor& chw) {
  Tensor out({1, chw.dim(0), chw.dim(1), chw.dim(2)});
  std::copy_n(chw.data(), chw.numel(), out.data());
  return out;
}

Tensor squeeze0(const Tensor& nchw) {
  Tensor out({nchw.dim(1), nchw.dim(2), nchw.dim(3)});
  std::copy_n(nchw.data(), nchw.numel(), out.data());
  return out;
}

// Flow file pair for the consecutive frames (t, t+1), named after the
// earlier frame's stem.
struct FlowPair {
  fs::path fwd, bwd;
};

FlowPair flow_pair_paths(const data::FrameSequence& seq, int t, const fs::path& dir) {
  const std::string stem = seq.frames[std::size_t(t)].path.stem().string();
  return {dir / (stem + ".fwd.flo"), dir / (stem + ".bwd.flo")};
}

bool fully_masked(const Tensor& mask) {
  for (std::int64_t i = 0; i < mask.numel(); ++i)
    if (mask[i] > 0.5) return false;
  return true;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["fid"] = fid;
  j["fwe"] = fwe;
  j["mse"] = mse;
  j["per_clip"] = nlohmann::ordered_json::array();
  for (const ClipScores& c : per_clip) {
    nlohmann::ordered_json e;
    e["clip"] = c.clip;
    e["frames"] = c.frames;
    e["pairs"] = c.pairs;
    e["fid"] = c.has_fid ? nlohmann::ordered_json(c.fid) : nlohmann::ordered_json(nullptr);
    e["fwe"] = c.has_temporal ? nlohmann::ordered_json(c.fwe) : nlohmann::ordered_json(nullptr);
    e["mse"] = c.has_temporal ? nlohmann::ordered_json(c.mse) : nlohmann::ordered_json(nullptr);
    j["per_clip"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

EvalReport evaluate_run(const EvaluateOptions& opt) {
  const data::DatasetRoot ds = data::load_dataset_root(opt.dataset);
  if (ds.test_source.empty())
    throw DataError("evaluate: dataset has no test source clips (testA is empty)");

  Models models;
  int size = opt.image_size;
  if (!opt.identity) {
    if (opt.checkpoint.empty())
      throw ConfigError("evaluate: a checkpoint is required unless identity mode is on");
    const Checkpoint ckpt = read_checkpoint(opt.checkpoint);
    const VariantConfig cfg = config_from_yaml(ckpt.config_text);
    if (ckpt.arch_hash != cfg.arch_hash())
      throw DataError("architecture-hash mismatch between checkpoint and its embedded config");
    models = Models::build(cfg);
    apply_model_weights(models, ckpt);
    size = cfg.generator.image_size;
  }

  // Every consecutive pair needs both flow directions before any inference
  // runs; one aborted half-evaluation per typo'd path is enough.
  std::vector<std::string> missing;
  for (const data::FrameSequence& seq : ds.test_source)
    for (const auto& [t, t1] : data::consecutive_pair_indices(seq)) {
      (void)t1;
      const FlowPair fp = flow_pair_paths(seq, t, opt.flow_dir);
      if (!fs::exists(fp.fwd)) missing.push_back(fp.fwd.string());
      if (!fs::exists(fp.bwd)) missing.push_back(fp.bwd.string());
    }
  if (!missing.empty()) {
    std::string msg = "evaluate: missing flow files for " + std::to_string(missing.size()) +
                      " consecutive-pair entries:";
    for (const std::string& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  auto extractor = metrics::make_extractor(opt.extractor);

  EvalReport report;
  metrics::FeatureAccumulator fake_acc(extractor->dim());
  std::vector<std::vector<Eigen::VectorXd>> clip_feats;
  double fwe_sum = 0.0, mse_sum = 0.0;
  std::int64_t fwe_pairs = 0, mse_pairs = 0;

  NoGradGuard guard;
  for (const data::FrameSequence& seq : ds.test_source) {
    ClipScores cs;
    cs.clip = seq.source_id;
    cs.frames = seq.size();

    metrics::StylizedSequence sty;
    for (int t = 0; t < seq.size(); ++t) {
      Tensor x = data::load_frame(seq, t, size);
      Tensor y = opt.identity ? x : squeeze0(models.to_target_single(Var(unsqueeze0(x))).value());
      sty.inputs.push_back(std::move(x));
      sty.frames.push_back(std::move(y));
    }
    for (const auto& [t, t1] : data::consecutive_pair_indices(seq)) {
      (void)t1;
      const FlowPair fp = flow_pair_paths(seq, t, opt.flow_dir);
      const Tensor fwd = flowio::read_flo_resized(fp.fwd, size);
      Tensor bwd = flowio::read_flo_resized(fp.bwd, size);
      Tensor mask = ops::occlusion_mask(bwd, fwd);
      if (!fully_masked(mask)) ++cs.fwe_pairs;
      sty.flows.push_back(std::move(bwd));
      sty.masks.push_back(std::move(mask));
      ++cs.pairs;
    }

    if (cs.pairs >= 1) {
      cs.fwe = metrics::flow_warping_error(sty);
      cs.mse = metrics::temporal_mse(sty.inputs, sty.frames);
      cs.has_temporal = true;
      fwe_sum += cs.fwe * cs.fwe_pairs;
      fwe_pairs += cs.fwe_pairs;
      mse_sum += cs.mse * cs.pairs;
      mse_pairs += cs.pairs;
    }

    std::vector<Eigen::VectorXd> feats;
    for (const Tensor& y : sty.frames) {
      feats.push_back(extractor->features(y));
      fake_acc.add(feats.back());
    }
    clip_feats.push_back(std::move(feats));
    report.per_clip.push_back(std::move(cs));
  }

  metrics::FeatureStats real;
  if (!opt.real_features.empty()) {
    real = metrics::stats_from_features(metrics::read_feature_file(opt.real_features));
    if (real.dim() != extractor->dim())
      throw DataError("evaluate: real feature file dimension " + std::to_string(real.dim()) +
                      " does not match extractor '" + extractor->name() + "' (" +
                      std::to_string(extractor->dim()) + ")");
  } else {
    if (int(ds.test_target.images.size()) < 2)
      throw DataError(
          "evaluate: need at least 2 test target images for FID "
          "(or pass a precomputed real-feature file)");
    metrics::FeatureAccumulator real_acc(extractor->dim());
    for (const fs::path& p : ds.test_target.images)
      real_acc.add(extractor->features(data::preprocess(media::read_image(p), size)));
    real = real_acc.finish();
  }

  if (fake_acc.count() < 2)
    throw DataError("evaluate: need at least 2 stylized frames for FID, got " +
                    std::to_string(fake_acc.count()));
  report.fid = metrics::fid(real, fake_acc.finish());
  report.fwe = fwe_pairs > 0 ? fwe_sum / double(fwe_pairs) : 0.0;
  report.mse = mse_pairs > 0 ? mse_sum / double(mse_pairs) : 0.0;

  // Per-clip FID from the cached activations, now that the real stats exist.
  for (std::size_t ci = 0; ci < report.per_clip.size(); ++ci) {
    ClipScores& cs = report.per_clip[ci];
    if (cs.frames < 2) continue;
    cs.fid = metrics::fid(real, metrics::stats_from_features(clip_feats[ci]));
    cs.has_fid = true;
  }
  return report;
}

}  // namespace wait
