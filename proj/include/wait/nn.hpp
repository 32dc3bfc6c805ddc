#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wait/autograd.hpp"
#include "wait/ops.hpp"
#include "wait/rng.hpp"
#include "wait/warp_ops.hpp"

namespace wait::nn {

using NamedParam = std::pair<std::string, Var>;

// Layers hold their parameters as leaf Vars (requires_grad = true) that stay
// alive across iterations; every forward builds a fresh graph on top of them.
// Parameter names are dot-qualified and their order is the registration
// order, which fixes both checkpoint layout and init RNG consumption.
class Module {
 public:
  virtual ~Module() = default;
  virtual void append_parameters(const std::string& prefix,
                                 std::vector<NamedParam>& out) const = 0;

  std::vector<NamedParam> named_parameters(const std::string& prefix = "") const {
    std::vector<NamedParam> out;
    append_parameters(prefix, out);
    return out;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& nv : named_parameters()) n += nv.second.value().numel();
    return n;
  }

  void zero_grad() const {
    for (auto& nv : named_parameters()) nv.second.zero_grad();
  }
};

enum class Init { kNormal002, kZero };

// Convolution layer; weight init is normal(0, 0.02) unless kZero (used for
// offset-producing convs so the warping stage starts at the regular grid).
class Conv2d : public Module {
 public:
  Conv2d(int cin, int cout, int k, ops::Conv2dSpec spec, bool bias, Init init, Rng& rng)
      : cin_(cin), cout_(cout), k_(k), spec_(spec) {
    Tensor w({cout, cin, k, k});
    if (init == Init::kNormal002)
      for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, 0.02);
    weight_ = Var(std::move(w), true);
    if (bias) bias_ = Var(Tensor({cout}), true);
  }

  Var forward(const Var& x) const { return ops::conv2d(x, weight_, bias_, spec_); }

  void append_parameters(const std::string& prefix, std::vector<NamedParam>& out) const override {
    out.emplace_back(prefix + ".weight", weight_);
    if (bias_.defined()) out.emplace_back(prefix + ".bias", bias_);
  }

  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  int kernel_size() const { return k_; }
  const ops::Conv2dSpec& spec() const { return spec_; }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  int cin_, cout_, k_;
  ops::Conv2dSpec spec_;
  Var weight_, bias_;
};

// Instance normalization; affine defaults off, matching the CycleGAN lineage.
class InstanceNorm2d : public Module {
 public:
  explicit InstanceNorm2d(int channels, bool affine = false)
      : channels_(channels),
        affine_(affine),
        gamma_(Tensor({channels}, 1.0), affine),
        beta_(Tensor({channels}), affine) {}

  Var forward(const Var& x) const { return ops::instance_norm(x, gamma_, beta_); }

  void append_parameters(const std::string& prefix, std::vector<NamedParam>& out) const override {
    if (!affine_) return;
    out.emplace_back(prefix + ".gamma", gamma_);
    out.emplace_back(prefix + ".beta", beta_);
  }

  int channels() const { return channels_; }
  bool affine() const { return affine_; }

 private:
  int channels_;
  bool affine_;
  Var gamma_, beta_;
};

// Deformable 3x3 convolution; offsets come from a separate layer.
class DeformConv2d : public Module {
 public:
  DeformConv2d(int cin, int cout, bool bias, Rng& rng) : cin_(cin), cout_(cout) {
    Tensor w({cout, cin, 3, 3});
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, 0.02);
    weight_ = Var(std::move(w), true);
    if (bias) bias_ = Var(Tensor({cout}), true);
  }

  Var forward(const Var& x, const Var& offsets) const {
    return ops::deformable_conv2d(x, offsets, weight_, bias_);
  }

  void append_parameters(const std::string& prefix, std::vector<NamedParam>& out) const override {
    out.emplace_back(prefix + ".weight", weight_);
    if (bias_.defined()) out.emplace_back(prefix + ".bias", bias_);
  }

  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  int cin_, cout_;
  Var weight_, bias_;
};

}  // namespace wait::nn
