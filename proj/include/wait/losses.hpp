#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wait/autograd.hpp"
#include "wait/ops.hpp"
#include "wait/warp_ops.hpp"

namespace wait::losses {

// Realized scalar values of one training step. Components a variant does not
// compute stay exactly 0.
struct LossReport {
  double adv_G = 0.0;
  double adv_D = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double temp_diff = 0.0;
  double flow_warp = 0.0;
  double recycle = 0.0;
  double recurrent = 0.0;
  double total_G = 0.0;
  double total_D = 0.0;

  // Fixed key order, used by the jsonl loss log.
  std::vector<std::pair<std::string, double>> items() const;
  bool all_finite() const;
};

struct LossWeights {
  double cycle = 10.0;
  double identity = 5.0;
  double temp_diff = 1.0;
  double flow_warp = 1.0;
  double recurrent = 10.0;
  double recycle = 10.0;
};

enum class GanMode { kLeastSquares, kLogistic };
enum class Domain { kSource, kTarget };

// Counts temporal-loss evaluations per domain; the variant contracts
// (cyclegan runs none, recycleganv2 runs none on the target domain) are
// asserted against these.
struct LossCounters {
  std::int64_t temporal_source = 0;
  std::int64_t temporal_target = 0;
  void reset() { temporal_source = temporal_target = 0; }
};
LossCounters& loss_counters();

// mean |x - x_rec|
Var cycle_loss(const Var& x, const Var& x_rec);
// mean |y - g_of_y|
Var identity_loss(const Var& y, const Var& g_of_y);

// Least-squares form: mean((scores - target)^2), target 1 real / 0 fake.
// Logistic form: mean softplus(-scores) for real, mean softplus(scores) for
// fake (the stable -log sigmoid formulation).
Var adversarial_loss(const Var& scores, bool target_is_real,
                     GanMode mode = GanMode::kLeastSquares);

// mean |(x_t - x_aux) - (y_t - y_aux)|
Var temporal_diff_loss(const Var& x_t, const Var& x_aux, const Var& y_t, const Var& y_aux,
                       Domain domain);

// mean |y_t - flow_warp(y_other, flow)| where flow lives on frame t's grid
// and maps into the other frame (backward-warping convention). The training
// loss pairs t with t+1; the FWE metric reuses the same form with t-1.
Var flow_warp_loss(const Var& y_t, const Var& y_other, const Var& flow, Domain domain);

using Translate = std::function<Var(const Var&)>;
using Predict = std::function<Var(const Var&, const Var&)>;

struct RecyclePair {
  Var recurrent;  // L1(P(prev, curr), next)
  Var recycle;    // L1(next, back(P_other(to_other(prev), to_other(curr))))
};

RecyclePair recycle_losses(const Var& prev, const Var& curr, const Var& next,
                           const Translate& to_other, const Translate& back,
                           const Predict& predict_same, const Predict& predict_other,
                           Domain domain);

}  // namespace wait::losses
