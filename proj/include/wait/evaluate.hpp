#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wait/checkpoint.hpp"
#include "wait/data.hpp"

namespace wait {

// Scores a checkpoint on the test split of a dataset. Frames are stylized
// in memory (duplicated-reference inference) and the three metrics run on
// the float tensors directly, so the report never depends on PNG rounding.
//
// Flow files are precomputed externally. For the consecutive pair (t, t+1)
// with earlier-frame stem s, the flow dir must hold `s.fwd.flo` (flow on
// frame t's grid into t+1) and `s.bwd.flo` (flow on frame t+1's grid into t);
// FWE backward-warps y_t into frame t+1's geometry with the .bwd flow and
// masks occlusions from the (.bwd, .fwd) pair. One flow estimator must
// produce the whole directory or the comparison is meaningless.
struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::filesystem::path flow_dir;
  // Optional precomputed activations for the real side (WFTR file); when set
  // the extractor only runs on stylized frames.
  std::filesystem::path real_features;
  std::string extractor = "pixel8";
  // Pass-through "translation": scores the inputs themselves. Needs no
  // checkpoint; a sanity anchor (mse is exactly 0) and a no-op baseline.
  bool identity = false;
  // Working resolution when identity mode runs without a checkpoint.
  int image_size = 256;
};

struct ClipScores {
  std::string clip;
  int frames = 0;
  int pairs = 0;        // consecutive pairs; fwe skips fully-occluded ones
  int fwe_pairs = 0;    // pairs that actually contributed to fwe
  double fid = 0.0;     // defined only when frames >= 2
  bool has_fid = false;
  double fwe = 0.0;     // defined only when pairs >= 1
  double mse = 0.0;
  bool has_temporal = false;
};

struct EvalReport {
  double fid = 0.0;
  double fwe = 0.0;  // pair-weighted mean over clips (contributing pairs)
  double mse = 0.0;  // pair-weighted mean over clips
  std::vector<ClipScores> per_clip;
  // Keys exactly {fid, fwe, mse, per_clip}; doubles at full precision.
  std::string to_json() const;
};

EvalReport evaluate_run(const EvaluateOptions& opt);

}  // namespace wait
