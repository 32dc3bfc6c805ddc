#include "wait/losses.hpp"

#include <cmath>

namespace wait::losses {

std::vector<std::pair<std::string, double>> LossReport::items() const {
  return {{"adv_G", adv_G},         {"adv_D", adv_D},       {"cycle", cycle},
          {"identity", identity},   {"temp_diff", temp_diff}, {"flow_warp", flow_warp},
          {"recycle", recycle},     {"recurrent", recurrent}, {"total_G", total_G},
          {"total_D", total_D}};
}

bool LossReport::all_finite() const {
  for (const auto& kv : items())
    if (!std::isfinite(kv.second)) return false;
  return true;
}

LossCounters& loss_counters() {
  static LossCounters counters;
  return counters;
}

namespace {
void check_same_shape(const Var& a, const Var& b, const char* who) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(std::string(who) + ": shape mismatch, " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
}

void count_temporal(Domain domain) {
  if (domain == Domain::kSource)
    ++loss_counters().temporal_source;
  else
    ++loss_counters().temporal_target;
}
}  // namespace

Var cycle_loss(const Var& x, const Var& x_rec) {
  check_same_shape(x, x_rec, "cycle_loss");
  return ops::mean_abs(ops::sub(x, x_rec));
}

Var identity_loss(const Var& y, const Var& g_of_y) {
  check_same_shape(y, g_of_y, "identity_loss");
  return ops::mean_abs(ops::sub(y, g_of_y));
}

Var adversarial_loss(const Var& scores, bool target_is_real, GanMode mode) {
  if (!scores.value().all_finite())
    throw NumericError("adversarial_loss: non-finite discriminator scores");
  if (mode == GanMode::kLeastSquares)
    return ops::mean_sq_diff(scores, target_is_real ? 1.0 : 0.0);
  return ops::mean_softplus(scores, target_is_real ? -1.0 : 1.0);
}

Var temporal_diff_loss(const Var& x_t, const Var& x_aux, const Var& y_t, const Var& y_aux,
                       Domain domain) {
  check_same_shape(x_t, x_aux, "temporal_diff_loss");
  check_same_shape(y_t, y_aux, "temporal_diff_loss");
  check_same_shape(x_t, y_t, "temporal_diff_loss");
  count_temporal(domain);
  return ops::mean_abs(ops::sub(ops::sub(x_t, x_aux), ops::sub(y_t, y_aux)));
}

Var flow_warp_loss(const Var& y_t, const Var& y_other, const Var& flow, Domain domain) {
  check_same_shape(y_t, y_other, "flow_warp_loss");
  count_temporal(domain);
  return ops::mean_abs(ops::sub(y_t, ops::flow_warp(y_other, flow)));
}

RecyclePair recycle_losses(const Var& prev, const Var& curr, const Var& next,
                           const Translate& to_other, const Translate& back,
                           const Predict& predict_same, const Predict& predict_other,
                           Domain domain) {
  check_same_shape(prev, curr, "recycle_losses");
  check_same_shape(curr, next, "recycle_losses");
  if (!to_other || !back || !predict_same || !predict_other)
    throw ConfigError("recycle_losses: variant requires translator and predictor networks");
  count_temporal(domain);
  RecyclePair out;
  out.recurrent = ops::mean_abs(ops::sub(predict_same(prev, curr), next));
  out.recycle =
      ops::mean_abs(ops::sub(next, back(predict_other(to_other(prev), to_other(curr)))));
  return out;
}

}  // namespace wait::losses
