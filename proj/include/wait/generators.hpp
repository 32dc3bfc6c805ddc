#pragma once

#include <memory>
#include <vector>

#include "wait/nn.hpp"

namespace wait {

// Architecture hyperparameters shared by all networks. base_channels and
// image_size scale the whole topology down for desk-scale tests without
// changing its shape.
struct GeneratorSpec {
  int image_size = 256;
  int in_channels = 3;
  int base_channels = 64;  // backbone output width
  int residual_blocks = 9;
  int offset_depth = 8;
  bool offset_residual = false;  // optional residual offset blocks
  int num_warping_layers = 5;
  std::vector<int> dilations = {3, 6, 12, 18, 24};

  void validate() const;
};

namespace nnets {

// One residual block at the backbone's inner width: reflect-pad conv,
// instance norm, ReLU, reflect-pad conv, instance norm, skip add.
class ResBlock : public nn::Module {
 public:
  ResBlock(int channels, Rng& rng);
  Var forward(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;

 private:
  nn::Conv2d conv1_, conv2_;
  nn::InstanceNorm2d norm1_, norm2_;
};

// The translation backbone: 7x7 stem, two stride-2 downsampling stages,
// residual blocks at 4x width, two nearest-upsample+conv stages back to the
// base width. The final output convolution is intentionally absent; for a
// (N,3,S,S) input the output is (N,base,S,S).
class Backbone : public nn::Module {
 public:
  Backbone(const GeneratorSpec& spec, Rng& rng);
  Var forward(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;

  int out_channels() const { return base_; }
  int residual_blocks() const { return static_cast<int>(blocks_.size()); }

 private:
  int base_;
  nn::Conv2d stem_;
  nn::InstanceNorm2d stem_norm_;
  nn::Conv2d down1_, down2_;
  nn::InstanceNorm2d down1_norm_, down2_norm_;
  std::vector<ResBlock> blocks_;
  nn::Conv2d up1_, up2_;
  nn::InstanceNorm2d up1_norm_, up2_norm_;
};

// Offset-network block: two sequences of (3x3 conv, instance norm, ReLU),
// spatial dims preserved; optionally residual.
class OffsetBlock : public nn::Module {
 public:
  OffsetBlock(int channels, bool residual, Rng& rng);
  Var forward(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;
  bool residual() const { return residual_; }
  const nn::Conv2d& conv1() const { return conv1_; }
  const nn::Conv2d& conv2() const { return conv2_; }

 private:
  bool residual_;
  nn::Conv2d conv1_, conv2_;
  nn::InstanceNorm2d norm1_, norm2_;
};

// One parallel warping layer: a dilated 3x3 conv reads the offset features
// and produces the 18 offset channels consumed by a deformable 3x3 conv over
// the auxiliary features. The dilated conv starts at zero so training begins
// from the regular sampling grid.
class WarpingLayer : public nn::Module {
 public:
  WarpingLayer(int channels, int dilation, Rng& rng);
  // offsets = dilated(f_offset); out = deform(f_aux, offsets).
  Var forward(const Var& f_aux, const Var& f_offset, bool zero_offsets = false) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;
  int dilation() const { return dilated_.spec().dilation; }
  const nn::Conv2d& dilated() const { return dilated_; }
  const nn::DeformConv2d& deform() const { return deform_; }

 private:
  nn::Conv2d dilated_;
  nn::DeformConv2d deform_;
};

}  // namespace nnets

// The plain single-frame generator: backbone plus the 7x7 output conv + Tanh.
class PlainGenerator : public nn::Module {
 public:
  PlainGenerator(const GeneratorSpec& spec, Rng& rng);
  Var forward(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;
  const nnets::Backbone& backbone() const { return backbone_; }

 private:
  nnets::Backbone backbone_;
  nn::Conv2d out_conv_;
};

// The warping generator. forward(x_ref, x_aux):
//   F_ref, F_aux = backbone(x_ref), backbone(x_aux)   (shared weights)
//   F_diff = F_ref - F_aux
//   F_offset = offset_network(F_diff)
//   o_i = deform(F_aux, dilated_i(F_offset))          per warping layer
//   out = Tanh(7x7 conv over channel-stacked o_i)
class WaitGenerator : public nn::Module {
 public:
  WaitGenerator(const GeneratorSpec& spec, Rng& rng);
  Var forward(const Var& x_ref, const Var& x_aux) const;
  // Inference path: the auxiliary input duplicates the reference frame, so
  // F_diff = 0 and the offsets are produced from a zero feature map.
  Var forward_single(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;

  const nnets::Backbone& backbone() const { return backbone_; }
  int offset_depth() const { return static_cast<int>(offset_blocks_.size()); }
  const nnets::OffsetBlock& offset_block(int i) const { return offset_blocks_[i]; }
  int num_warping_layers() const { return static_cast<int>(warping_layers_.size()); }
  const nnets::WarpingLayer& warping_layer(int i) const { return warping_layers_[i]; }
  const nn::Conv2d& fusion() const { return fusion_; }

  Var offset_features(const Var& f_diff) const;
  // Per-layer warping outputs, exposed so the zero-offset reduction property
  // can be asserted at the generator level.
  std::vector<Var> warping_outputs(const Var& f_aux, const Var& f_offset,
                                   bool zero_offsets = false) const;

 private:
  nnets::Backbone backbone_;
  std::vector<nnets::OffsetBlock> offset_blocks_;
  std::vector<nnets::WarpingLayer> warping_layers_;
  nn::Conv2d fusion_;
};

// 70x70 patch discriminator: 4 stride-2/stride-1 conv stages + 1-channel
// score head; (N,3,256,256) -> (N,1,30,30).
class PatchDiscriminator : public nn::Module {
 public:
  PatchDiscriminator(const GeneratorSpec& spec, Rng& rng);
  Var forward(const Var& x) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;

 private:
  nn::Conv2d c1_, c2_, c3_, c4_, head_;
  nn::InstanceNorm2d n2_, n3_, n4_;
};

// Temporal predictor for the ReCycleGAN variants: consumes two frames
// (channel-concatenated), emits the predicted next frame. Small encoder
// decoder with additive skip connections.
class TemporalPredictor : public nn::Module {
 public:
  TemporalPredictor(const GeneratorSpec& spec, Rng& rng);
  Var forward(const Var& x_prev, const Var& x_curr) const;
  void append_parameters(const std::string& prefix, std::vector<nn::NamedParam>& out)
      const override;

 private:
  nn::Conv2d enc1_, enc2_, mid_, dec1_, dec2_, out_conv_;
  nn::InstanceNorm2d enc1_norm_, enc2_norm_, mid_norm_, dec1_norm_, dec2_norm_;
};

}  // namespace wait
