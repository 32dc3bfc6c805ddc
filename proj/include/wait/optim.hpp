#pragma once

#include <vector>

#include "wait/autograd.hpp"
#include "wait/rng.hpp"
#include "wait/tensor.hpp"

namespace wait::optim {

struct AdamConfig {
  double lr = 0.0008;
  double beta1 = 0.5;  // CycleGAN-recipe momentum, not the 0.9 default
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Slot order follows the
// parameter list, which in turn follows module registration order, so the
// optimizer state has a stable layout for checkpointing.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig cfg);

  void step();  // params without a gradient this iteration see g = 0
  void zero_grad();

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }

  int size() const { return static_cast<int>(params_.size()); }
  Tensor& moment1(int i) { return m_[static_cast<std::size_t>(i)]; }
  Tensor& moment2(int i) { return v_[static_cast<std::size_t>(i)]; }
  const Tensor& moment1(int i) const { return m_[static_cast<std::size_t>(i)]; }
  const Tensor& moment2(int i) const { return v_[static_cast<std::size_t>(i)]; }

 private:
  AdamConfig cfg_;
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

// Constant for the first half of training, then linear decay reaching 0 at
// epoch == total_epochs. Callable on the closed range [0, total_epochs].
double lr_schedule(int epoch, int total_epochs, double base_lr);

// History buffer of generated images for discriminator updates. Once full,
// query returns the incoming image with probability 0.5 and otherwise swaps
// it against a random buffered one.
class ImagePool {
 public:
  explicit ImagePool(int capacity) : capacity_(capacity) {}

  Tensor query(const Tensor& image, Rng& rng);        // one (C,H,W) image
  Tensor query_batch(const Tensor& batch, Rng& rng);  // per-item over (N,C,H,W)

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(buffer_.size()); }

 private:
  int capacity_;
  std::vector<Tensor> buffer_;
};

}  // namespace wait::optim
