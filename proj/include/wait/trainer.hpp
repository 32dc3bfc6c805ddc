#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "wait/checkpoint.hpp"
#include "wait/config.hpp"
#include "wait/data.hpp"
#include "wait/generators.hpp"
#include "wait/losses.hpp"
#include "wait/optim.hpp"

namespace wait {

// One training batch. Which tensors are defined depends on the variant:
// cyclegan uses x/y only; cyclegan_temp and wait add x_aux; optical_flow_warp
// puts x_{t+1} in x_aux plus the precomputed flow; the recycle variants use
// x_prev/x/x_next and (v1 only) a pseudo-triple y_prev/y/y_next.
struct Batch {
  Tensor x, x_aux, x_prev, x_next;
  Tensor y, y_prev, y_next;
  Tensor flow;
  std::vector<std::string> items;  // "clip@t" per reference frame, for diagnostics
  int size() const { return static_cast<int>(items.size()); }
};

// The networks a variant trains. g_x is the warping generator for the wait
// variant and the plain one otherwise; the temporal predictors exist only for
// the recycle variants.
struct Models {
  Variant variant = Variant::kWait;
  std::unique_ptr<WaitGenerator> g_x_wait;
  std::unique_ptr<PlainGenerator> g_x_plain;
  std::unique_ptr<PlainGenerator> g_y;
  std::unique_ptr<PatchDiscriminator> d_x, d_y;
  std::unique_ptr<TemporalPredictor> p_x, p_y;

  static Models build(const VariantConfig& cfg);

  Var to_target(const Var& ref, const Var& aux) const;  // pair path
  Var to_target_single(const Var& x) const;             // duplicated-reference path
  Var to_source(const Var& y) const;

  std::vector<nn::NamedParam> generator_parameters() const;  // includes predictors
  std::vector<nn::NamedParam> discriminator_parameters() const;
  std::vector<nn::NamedParam> named_parameters() const;
  void zero_grad_all() const;
};

// Per-epoch shuffled walk over the valid source positions for a variant.
class BatchSampler {
 public:
  BatchSampler(const data::DatasetRoot* ds, const VariantConfig* cfg);

  int items_per_epoch() const { return static_cast<int>(index_.size()); }
  int iterations_per_epoch() const;
  void start_epoch(Rng& rng);
  bool done() const { return cursor_ >= order_.size(); }
  Batch next(Rng& rng);

 private:
  const data::DatasetRoot* ds_;
  const VariantConfig* cfg_;
  std::vector<std::pair<int, int>> index_;  // (clip, t)
  std::vector<std::pair<int, int>> order_;
  std::size_t cursor_ = 0;
};

class Trainer {
 public:
  Trainer(VariantConfig cfg, data::DatasetRoot ds);

  // One optimization step: generator update first, then both discriminators
  // on pooled fakes. Throws NumericError on a non-finite loss.
  losses::LossReport train_step(const Batch& batch);
  Batch sample_batch();  // advances the epoch walk, reshuffling as needed

  // Full loop with the run-directory contract: config.yaml, logs/losses.jsonl,
  // checkpoints/epoch_XXX + latest, samples/epoch_XXX/*.png.
  void run(const std::filesystem::path& run_dir);

  Checkpoint make_checkpoint() const;
  void load_checkpoint(const Checkpoint& ckpt);

  const VariantConfig& config() const { return cfg_; }
  Models& models() { return models_; }
  optim::Adam& adam_g() { return *adam_g_; }
  optim::Adam& adam_d() { return *adam_d_; }
  BatchSampler& sampler() { return sampler_; }
  int completed_epochs() const { return epoch_; }
  std::int64_t iterations_done() const { return global_iter_; }
  double current_lr() const { return lr_; }
  void set_lr(double lr);

 private:
  losses::LossReport train_step_impl(const Batch& batch);
  void write_checkpoint_files(const std::filesystem::path& run_dir) const;
  void write_samples(const std::filesystem::path& run_dir) const;
  Rng epoch_rng(int epoch) const;

  VariantConfig cfg_;
  data::DatasetRoot ds_;
  Models models_;
  std::unique_ptr<optim::Adam> adam_g_, adam_d_;
  optim::ImagePool pool_x_, pool_y_;
  Rng pool_rng_;
  BatchSampler sampler_;
  Rng walk_rng_;       // stream of the epoch currently being walked
  int walk_epoch_ = 0; // index of the next epoch stream to open
  std::vector<std::pair<int, int>> sample_frames_;  // fixed validation frames
  bool samples_from_test_ = true;
  int epoch_ = 0;  // completed epochs
  std::int64_t global_iter_ = 0;
  double lr_ = 0.0;
};

struct StylizeOptions {
  std::filesystem::path out_dir;
  // WAIT inference duplicates the reference frame by default; this switches
  // the auxiliary input to the real neighboring frame.
  bool real_neighbor_aux = false;
};

// Rebuilds the networks from the checkpoint's embedded config and translates
// every frame independently (stateless). Output PNGs mirror the input stems.
data::FrameSequence stylize_video(const Checkpoint& ckpt, const data::FrameSequence& frames,
                                  const StylizeOptions& opt);

// Model weights only (no optimizer state); shared by stylize and evaluation.
void apply_model_weights(Models& models, const Checkpoint& ckpt);

// cmd_train's workhorse: optionally resumes from checkpoints/latest.
void train(const VariantConfig& cfg, const data::DatasetRoot& ds,
           const std::filesystem::path& run_dir, bool resume);

}  // namespace wait
