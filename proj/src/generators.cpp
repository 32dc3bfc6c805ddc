#include "wait/generators.hpp"

#include <string>

namespace wait {

void GeneratorSpec::validate() const {
  if (image_size < 8 || image_size % 4 != 0)
    throw ConfigError("generator: image_size must be a multiple of 4 and >= 8");
  if (base_channels < 1) throw ConfigError("generator: base_channels must be >= 1");
  if (residual_blocks < 1) throw ConfigError("generator: residual_blocks must be >= 1");
  if (offset_depth < 1) throw ConfigError("generator: offset_depth must be >= 1");
  if (num_warping_layers < 1) throw ConfigError("generator: num_warping_layers must be >= 1");
  if (static_cast<int>(dilations.size()) != num_warping_layers)
    throw ConfigError("generator: dilations list must have num_warping_layers entries");
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    if (dilations[i] < 1) throw ConfigError("generator: dilations must be >= 1");
    if (i > 0 && dilations[i] <= dilations[i - 1])
      throw ConfigError("generator: dilations must be strictly increasing");
  }
}

namespace nnets {

namespace {
constexpr ops::Conv2dSpec kSame3{1, 1, 1};
constexpr ops::Conv2dSpec kValid3{1, 0, 1};
constexpr ops::Conv2dSpec kValid7{1, 0, 1};
constexpr ops::Conv2dSpec kDown3{2, 1, 1};

ops::Conv2dSpec dilated_spec(int dilation) { return {1, dilation, dilation}; }
}  // namespace

ResBlock::ResBlock(int channels, Rng& rng)
    : conv1_(channels, channels, 3, kValid3, true, nn::Init::kNormal002, rng),
      conv2_(channels, channels, 3, kValid3, true, nn::Init::kNormal002, rng),
      norm1_(channels),
      norm2_(channels) {}

Var ResBlock::forward(const Var& x) const {
  Var h = ops::relu(norm1_.forward(conv1_.forward(ops::reflect_pad2d(x, 1))));
  h = norm2_.forward(conv2_.forward(ops::reflect_pad2d(h, 1)));
  return ops::add(x, h);
}

void ResBlock::append_parameters(const std::string& prefix,
                                 std::vector<nn::NamedParam>& out) const {
  conv1_.append_parameters(prefix + ".conv1", out);
  norm1_.append_parameters(prefix + ".norm1", out);
  conv2_.append_parameters(prefix + ".conv2", out);
  norm2_.append_parameters(prefix + ".norm2", out);
}

Backbone::Backbone(const GeneratorSpec& spec, Rng& rng)
    : base_(spec.base_channels),
      stem_(spec.in_channels, base_, 7, kValid7, true, nn::Init::kNormal002, rng),
      stem_norm_(base_),
      down1_(base_, base_ * 2, 3, kDown3, true, nn::Init::kNormal002, rng),
      down2_(base_ * 2, base_ * 4, 3, kDown3, true, nn::Init::kNormal002, rng),
      down1_norm_(base_ * 2),
      down2_norm_(base_ * 4),
      up1_(base_ * 4, base_ * 2, 3, kSame3, true, nn::Init::kNormal002, rng),
      up2_(base_ * 2, base_, 3, kSame3, true, nn::Init::kNormal002, rng),
      up1_norm_(base_ * 2),
      up2_norm_(base_) {
  blocks_.reserve(static_cast<std::size_t>(spec.residual_blocks));
  for (int i = 0; i < spec.residual_blocks; ++i) blocks_.emplace_back(base_ * 4, rng);
}

Var Backbone::forward(const Var& x) const {
  Var h = ops::relu(stem_norm_.forward(stem_.forward(ops::reflect_pad2d(x, 3))));
  h = ops::relu(down1_norm_.forward(down1_.forward(h)));
  h = ops::relu(down2_norm_.forward(down2_.forward(h)));
  for (const auto& block : blocks_) h = block.forward(h);
  h = ops::relu(up1_norm_.forward(up1_.forward(ops::upsample_nearest2(h))));
  h = ops::relu(up2_norm_.forward(up2_.forward(ops::upsample_nearest2(h))));
  return h;
}

void Backbone::append_parameters(const std::string& prefix,
                                 std::vector<nn::NamedParam>& out) const {
  stem_.append_parameters(prefix + ".stem", out);
  stem_norm_.append_parameters(prefix + ".stem_norm", out);
  down1_.append_parameters(prefix + ".down1", out);
  down1_norm_.append_parameters(prefix + ".down1_norm", out);
  down2_.append_parameters(prefix + ".down2", out);
  down2_norm_.append_parameters(prefix + ".down2_norm", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].append_parameters(prefix + ".res" + std::to_string(i), out);
  up1_.append_parameters(prefix + ".up1", out);
  up1_norm_.append_parameters(prefix + ".up1_norm", out);
  up2_.append_parameters(prefix + ".up2", out);
  up2_norm_.append_parameters(prefix + ".up2_norm", out);
}

OffsetBlock::OffsetBlock(int channels, bool residual, Rng& rng)
    : residual_(residual),
      conv1_(channels, channels, 3, kSame3, true, nn::Init::kNormal002, rng),
      conv2_(channels, channels, 3, kSame3, true, nn::Init::kNormal002, rng),
      norm1_(channels),
      norm2_(channels) {}

Var OffsetBlock::forward(const Var& x) const {
  Var h = ops::relu(norm1_.forward(conv1_.forward(x)));
  h = ops::relu(norm2_.forward(conv2_.forward(h)));
  return residual_ ? ops::add(x, h) : h;
}

void OffsetBlock::append_parameters(const std::string& prefix,
                                    std::vector<nn::NamedParam>& out) const {
  conv1_.append_parameters(prefix + ".conv1", out);
  norm1_.append_parameters(prefix + ".norm1", out);
  conv2_.append_parameters(prefix + ".conv2", out);
  norm2_.append_parameters(prefix + ".norm2", out);
}

WarpingLayer::WarpingLayer(int channels, int dilation, Rng& rng)
    : dilated_(channels, 18, 3, dilated_spec(dilation), true, nn::Init::kZero, rng),
      deform_(channels, channels, true, rng) {}

Var WarpingLayer::forward(const Var& f_aux, const Var& f_offset, bool zero_offsets) const {
  if (zero_offsets) {
    const Tensor& f = f_aux.value();
    Var zeros(Tensor({f.dim(0), 18, f.dim(2), f.dim(3)}), false);
    return deform_.forward(f_aux, zeros);
  }
  return deform_.forward(f_aux, dilated_.forward(f_offset));
}

void WarpingLayer::append_parameters(const std::string& prefix,
                                     std::vector<nn::NamedParam>& out) const {
  dilated_.append_parameters(prefix + ".dilated", out);
  deform_.append_parameters(prefix + ".deform", out);
}

}  // namespace nnets

PlainGenerator::PlainGenerator(const GeneratorSpec& spec, Rng& rng)
    : backbone_((spec.validate(), spec), rng),
      out_conv_(spec.base_channels, spec.in_channels, 7, nnets::kValid7, true,
                nn::Init::kNormal002, rng) {}

Var PlainGenerator::forward(const Var& x) const {
  return ops::tanh(out_conv_.forward(ops::reflect_pad2d(backbone_.forward(x), 3)));
}

void PlainGenerator::append_parameters(const std::string& prefix,
                                       std::vector<nn::NamedParam>& out) const {
  backbone_.append_parameters(prefix + ".backbone", out);
  out_conv_.append_parameters(prefix + ".out_conv", out);
}

WaitGenerator::WaitGenerator(const GeneratorSpec& spec, Rng& rng)
    : backbone_((spec.validate(), spec), rng),
      fusion_(spec.base_channels * spec.num_warping_layers, spec.in_channels, 7, nnets::kValid7,
              true, nn::Init::kNormal002, rng) {
  offset_blocks_.reserve(static_cast<std::size_t>(spec.offset_depth));
  for (int i = 0; i < spec.offset_depth; ++i)
    offset_blocks_.emplace_back(spec.base_channels, spec.offset_residual, rng);
  warping_layers_.reserve(static_cast<std::size_t>(spec.num_warping_layers));
  for (int i = 0; i < spec.num_warping_layers; ++i)
    warping_layers_.emplace_back(spec.base_channels, spec.dilations[static_cast<std::size_t>(i)],
                                 rng);
}

Var WaitGenerator::offset_features(const Var& f_diff) const {
  Var h = f_diff;
  for (const auto& block : offset_blocks_) h = block.forward(h);
  return h;
}

std::vector<Var> WaitGenerator::warping_outputs(const Var& f_aux, const Var& f_offset,
                                                bool zero_offsets) const {
  std::vector<Var> outs;
  outs.reserve(warping_layers_.size());
  for (const auto& layer : warping_layers_)
    outs.push_back(layer.forward(f_aux, f_offset, zero_offsets));
  return outs;
}

Var WaitGenerator::forward(const Var& x_ref, const Var& x_aux) const {
  if (!x_ref.value().same_shape(x_aux.value()))
    throw ShapeError("wait_generator: reference/auxiliary shape mismatch");
  const Var f_ref = backbone_.forward(x_ref);
  const Var f_aux = backbone_.forward(x_aux);
  const Var f_diff = ops::sub(f_ref, f_aux);
  const Var f_offset = offset_features(f_diff);
  const Var stacked = ops::concat_channels(warping_outputs(f_aux, f_offset));
  return ops::tanh(fusion_.forward(ops::reflect_pad2d(stacked, 3)));
}

Var WaitGenerator::forward_single(const Var& x) const { return forward(x, x); }

void WaitGenerator::append_parameters(const std::string& prefix,
                                      std::vector<nn::NamedParam>& out) const {
  backbone_.append_parameters(prefix + ".backbone", out);
  for (std::size_t i = 0; i < offset_blocks_.size(); ++i)
    offset_blocks_[i].append_parameters(prefix + ".offset" + std::to_string(i), out);
  for (std::size_t i = 0; i < warping_layers_.size(); ++i)
    warping_layers_[i].append_parameters(prefix + ".warp" + std::to_string(i), out);
  fusion_.append_parameters(prefix + ".fusion", out);
}

PatchDiscriminator::PatchDiscriminator(const GeneratorSpec& spec, Rng& rng)
    : c1_(spec.in_channels, spec.base_channels, 4, {2, 1, 1}, true, nn::Init::kNormal002, rng),
      c2_(spec.base_channels, spec.base_channels * 2, 4, {2, 1, 1}, true, nn::Init::kNormal002,
          rng),
      c3_(spec.base_channels * 2, spec.base_channels * 4, 4, {2, 1, 1}, true,
          nn::Init::kNormal002, rng),
      c4_(spec.base_channels * 4, spec.base_channels * 8, 4, {1, 1, 1}, true,
          nn::Init::kNormal002, rng),
      head_(spec.base_channels * 8, 1, 4, {1, 1, 1}, true, nn::Init::kNormal002, rng),
      n2_(spec.base_channels * 2),
      n3_(spec.base_channels * 4),
      n4_(spec.base_channels * 8) {}

Var PatchDiscriminator::forward(const Var& x) const {
  Var h = ops::leaky_relu(c1_.forward(x), 0.2);
  h = ops::leaky_relu(n2_.forward(c2_.forward(h)), 0.2);
  h = ops::leaky_relu(n3_.forward(c3_.forward(h)), 0.2);
  h = ops::leaky_relu(n4_.forward(c4_.forward(h)), 0.2);
  return head_.forward(h);
}

void PatchDiscriminator::append_parameters(const std::string& prefix,
                                           std::vector<nn::NamedParam>& out) const {
  c1_.append_parameters(prefix + ".c1", out);
  c2_.append_parameters(prefix + ".c2", out);
  n2_.append_parameters(prefix + ".n2", out);
  c3_.append_parameters(prefix + ".c3", out);
  n3_.append_parameters(prefix + ".n3", out);
  c4_.append_parameters(prefix + ".c4", out);
  n4_.append_parameters(prefix + ".n4", out);
  head_.append_parameters(prefix + ".head", out);
}

TemporalPredictor::TemporalPredictor(const GeneratorSpec& spec, Rng& rng)
    : enc1_(spec.in_channels * 2, spec.base_channels, 3, nnets::kDown3, true,
            nn::Init::kNormal002, rng),
      enc2_(spec.base_channels, spec.base_channels * 2, 3, nnets::kDown3, true,
            nn::Init::kNormal002, rng),
      mid_(spec.base_channels * 2, spec.base_channels * 2, 3, nnets::kSame3, true,
           nn::Init::kNormal002, rng),
      dec1_(spec.base_channels * 2, spec.base_channels, 3, nnets::kSame3, true,
            nn::Init::kNormal002, rng),
      dec2_(spec.base_channels, spec.base_channels, 3, nnets::kSame3, true,
            nn::Init::kNormal002, rng),
      out_conv_(spec.base_channels, spec.in_channels, 7, nnets::kValid7, true,
                nn::Init::kNormal002, rng),
      enc1_norm_(spec.base_channels),
      enc2_norm_(spec.base_channels * 2),
      mid_norm_(spec.base_channels * 2),
      dec1_norm_(spec.base_channels),
      dec2_norm_(spec.base_channels) {}

Var TemporalPredictor::forward(const Var& x_prev, const Var& x_curr) const {
  if (!x_prev.value().same_shape(x_curr.value()))
    throw ShapeError("temporal_predictor: frame shape mismatch");
  Var h = ops::concat_channels({x_prev, x_curr});
  const Var e1 = ops::relu(enc1_norm_.forward(enc1_.forward(h)));       // S/2, base
  const Var e2 = ops::relu(enc2_norm_.forward(enc2_.forward(e1)));      // S/4, 2*base
  Var m = ops::relu(mid_norm_.forward(mid_.forward(e2)));               // S/4
  m = ops::relu(dec1_norm_.forward(dec1_.forward(ops::upsample_nearest2(m))));  // S/2, base
  m = ops::add(m, e1);  // additive skip
  m = ops::relu(dec2_norm_.forward(dec2_.forward(ops::upsample_nearest2(m))));  // S, base
  return ops::tanh(out_conv_.forward(ops::reflect_pad2d(m, 3)));
}

void TemporalPredictor::append_parameters(const std::string& prefix,
                                          std::vector<nn::NamedParam>& out) const {
  enc1_.append_parameters(prefix + ".enc1", out);
  enc1_norm_.append_parameters(prefix + ".enc1_norm", out);
  enc2_.append_parameters(prefix + ".enc2", out);
  enc2_norm_.append_parameters(prefix + ".enc2_norm", out);
  mid_.append_parameters(prefix + ".mid", out);
  mid_norm_.append_parameters(prefix + ".mid_norm", out);
  dec1_.append_parameters(prefix + ".dec1", out);
  dec1_norm_.append_parameters(prefix + ".dec1_norm", out);
  dec2_.append_parameters(prefix + ".dec2", out);
  dec2_norm_.append_parameters(prefix + ".dec2_norm", out);
  out_conv_.append_parameters(prefix + ".out_conv", out);
}

}  // namespace wait
