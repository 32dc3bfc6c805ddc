#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "wait/generators.hpp"

using namespace wait;
using testing_util::rand_tensor;

namespace {

GeneratorSpec mini_spec() {
  GeneratorSpec s;
  s.image_size = 32;
  s.base_channels = 8;
  s.residual_blocks = 2;
  s.offset_depth = 3;
  s.num_warping_layers = 3;
  s.dilations = {1, 2, 3};
  return s;
}

Tensor rand_image(int n, int size, Rng& rng) { return rand_tensor({n, 3, size, size}, rng); }

}  // namespace

TEST_CASE("GeneratorSpec validation") {
  GeneratorSpec s = mini_spec();
  CHECK_NOTHROW(s.validate());
  s.dilations = {1, 2};  // wrong count
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.dilations = {3, 2, 1};  // not increasing
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = mini_spec();
  s.image_size = 30;  // not a multiple of 4
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = mini_spec();
  s.offset_depth = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("backbone output shape and per-sample instance norm") {
  Rng rng(100);
  const GeneratorSpec s = mini_spec();
  nnets::Backbone bb(s, rng);

  Rng data_rng(101);
  Tensor batch = rand_image(2, s.image_size, data_rng);
  NoGradGuard ng;
  const Tensor out = bb.forward(Var(batch, false)).value();
  REQUIRE(out.shape() == std::vector<int>{2, s.base_channels, s.image_size, s.image_size});
  CHECK(out.all_finite());

  // Instance norm is per-sample: batched forward equals per-sample forwards.
  for (int ni = 0; ni < 2; ++ni) {
    Tensor single({1, 3, s.image_size, s.image_size});
    for (std::int64_t i = 0; i < single.numel(); ++i)
      single[i] = batch[ni * single.numel() + i];
    const Tensor one = bb.forward(Var(single, false)).value();
    double max_diff = 0.0;
    for (std::int64_t i = 0; i < one.numel(); ++i)
      max_diff = std::max(max_diff, std::fabs(one[i] - out[ni * one.numel() + i]));
    CHECK(max_diff < 1e-10);
  }
}

TEST_CASE("backbone forward is deterministic") {
  Rng rng(102);
  nnets::Backbone bb(mini_spec(), rng);
  Rng data_rng(103);
  Tensor x = rand_image(1, 32, data_rng);
  NoGradGuard ng;
  const Tensor a = bb.forward(Var(x, false)).value();
  const Tensor b = bb.forward(Var(x, false)).value();
  CHECK(a.max_abs_diff(b) == 0.0);
}

TEST_CASE("plain generator emits same-size frames inside (-1,1)") {
  Rng rng(104);
  const GeneratorSpec s = mini_spec();
  PlainGenerator g(s, rng);
  Rng data_rng(105);
  NoGradGuard ng;
  const Tensor out = g.forward(Var(rand_image(2, s.image_size, data_rng), false)).value();
  REQUIRE(out.shape() == std::vector<int>{2, 3, s.image_size, s.image_size});
  CHECK(out.max_abs() <= 1.0);
  CHECK(out.all_finite());
}

TEST_CASE("wait generator forward contract") {
  Rng rng(106);
  const GeneratorSpec s = mini_spec();
  WaitGenerator g(s, rng);
  CHECK(g.offset_depth() == s.offset_depth);
  CHECK(g.num_warping_layers() == s.num_warping_layers);
  for (int i = 0; i < g.num_warping_layers(); ++i)
    CHECK(g.warping_layer(i).dilation() == s.dilations[static_cast<std::size_t>(i)]);
  CHECK(g.fusion().in_channels() == s.base_channels * s.num_warping_layers);
  CHECK(g.fusion().kernel_size() == 7);

  Rng data_rng(107);
  Tensor x_ref = rand_image(1, s.image_size, data_rng);
  Tensor x_aux = rand_image(1, s.image_size, data_rng);
  NoGradGuard ng;
  const Tensor out = g.forward(Var(x_ref, false), Var(x_aux, false)).value();
  REQUIRE(out.shape() == std::vector<int>{1, 3, s.image_size, s.image_size});
  CHECK(out.max_abs() <= 1.0);
  CHECK(out.all_finite());

  // Swapping reference and auxiliary flips the sign of F_diff and must not
  // produce the same frame on a random network.
  const Tensor swapped = g.forward(Var(x_aux, false), Var(x_ref, false)).value();
  CHECK(swapped.max_abs_diff(out) > 1e-6);

  // Duplicated-reference inference path: F_diff = 0, still finite.
  const Tensor single = g.forward_single(Var(x_ref, false)).value();
  CHECK(single.all_finite());
  CHECK(single.max_abs() <= 1.0);

  CHECK_THROWS_AS(
      g.forward(Var(x_ref, false), Var(Tensor({1, 3, 16, 16}), false)),
      ShapeError);
}

TEST_CASE("wait warping layers reduce to plain conv under zero offsets") {
  Rng rng(108);
  const GeneratorSpec s = mini_spec();
  WaitGenerator g(s, rng);
  Rng data_rng(109);
  Tensor f_aux = rand_tensor({1, s.base_channels, 12, 12}, data_rng);
  Tensor f_off = rand_tensor({1, s.base_channels, 12, 12}, data_rng);
  NoGradGuard ng;
  const auto outs = g.warping_outputs(Var(f_aux, false), Var(f_off, false), true);
  REQUIRE(static_cast<int>(outs.size()) == s.num_warping_layers);
  for (int i = 0; i < s.num_warping_layers; ++i) {
    const auto& layer = g.warping_layer(i);
    const Tensor expect = ops::conv2d_forward(f_aux, layer.deform().weight().value(),
                                              layer.deform().bias().value(), {1, 1, 1});
    CHECK(outs[static_cast<std::size_t>(i)].value().max_abs_diff(expect) < 1e-10);
  }

  // The dilated offset convs start at zero, so a fresh network's regular
  // forward already sits on the regular grid.
  const auto regular = g.warping_outputs(Var(f_aux, false), Var(f_off, false), false);
  for (int i = 0; i < s.num_warping_layers; ++i)
    CHECK(regular[static_cast<std::size_t>(i)].value().max_abs_diff(
              outs[static_cast<std::size_t>(i)].value()) == 0.0);
}

TEST_CASE("wait parameter count exceeds plain by its extra stages") {
  Rng rng_a(110), rng_b(111);
  const GeneratorSpec s = mini_spec();
  WaitGenerator wg(s, rng_a);
  PlainGenerator pg(s, rng_b);

  std::int64_t offset_params = 0, warp_params = 0;
  std::vector<nn::NamedParam> tmp;
  for (int i = 0; i < wg.offset_depth(); ++i) {
    tmp.clear();
    wg.offset_block(i).append_parameters("", tmp);
    for (const auto& nv : tmp) offset_params += nv.second.value().numel();
  }
  for (int i = 0; i < wg.num_warping_layers(); ++i) {
    tmp.clear();
    wg.warping_layer(i).append_parameters("", tmp);
    for (const auto& nv : tmp) warp_params += nv.second.value().numel();
  }
  // fusion widens the 7x7 output conv from base -> base*num_layers inputs
  const std::int64_t fusion_params = 3 * (s.base_channels * s.num_warping_layers) * 49 + 3;
  const std::int64_t out_conv_params = 3 * s.base_channels * 49 + 3;

  CHECK(wg.parameter_count() - pg.parameter_count() ==
        offset_params + warp_params + fusion_params - out_conv_params);

  // Architecture determinism: same spec, same seed -> same names and counts.
  Rng rng_c(110);
  WaitGenerator wg2(s, rng_c);
  const auto p1 = wg.named_parameters("g");
  const auto p2 = wg2.named_parameters("g");
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].first == p2[i].first);
    CHECK(p1[i].second.value().max_abs_diff(p2[i].second.value()) == 0.0);
  }
}

TEST_CASE("gradients flow to both wait generator inputs") {
  Rng rng(112);
  GeneratorSpec s = mini_spec();
  s.image_size = 16;
  s.base_channels = 4;
  s.residual_blocks = 1;
  s.offset_depth = 1;
  s.num_warping_layers = 2;
  s.dilations = {1, 2};
  WaitGenerator g(s, rng);

  // At init the dilated offset convs are zero, which gates every path from
  // x_ref to the output; move them to a generic point first.
  for (int i = 0; i < g.num_warping_layers(); ++i) {
    Var w = g.warping_layer(i).dilated().weight();
    for (std::int64_t j = 0; j < w.value().numel(); ++j) w.value()[j] = rng.normal(0.0, 0.05);
  }

  Rng data_rng(113);
  std::vector<Var> inputs{Var(rand_image(1, s.image_size, data_rng), true),
                          Var(rand_image(1, s.image_size, data_rng), true)};
  Rng pick(114);
  auto r = testing_util::spot_grad_check(
      [&g](std::vector<Var>& in) { return ops::mean_sq(g.forward(in[0], in[1])); }, inputs,
      pick, 12, 1e-5);
  CAPTURE(r.max_rel);
  CHECK(r.max_rel < 1e-3);

  // Both inputs actually received nonzero gradients.
  CHECK(inputs[0].grad().max_abs() > 0.0);
  CHECK(inputs[1].grad().max_abs() > 0.0);
}

TEST_CASE("patch discriminator spatial contract") {
  Rng rng(115);
  GeneratorSpec s;
  s.image_size = 256;
  s.base_channels = 4;  // width does not affect the spatial arithmetic
  PatchDiscriminator d(s, rng);
  Rng data_rng(116);
  NoGradGuard ng;
  const Tensor out = d.forward(Var(rand_image(1, 256, data_rng), false)).value();
  REQUIRE(out.shape() == std::vector<int>{1, 1, 30, 30});

  const GeneratorSpec mini = mini_spec();
  PatchDiscriminator dm(mini, rng);
  const Tensor out_m = dm.forward(Var(rand_image(2, 32, data_rng), false)).value();
  REQUIRE(out_m.shape() == std::vector<int>{2, 1, 2, 2});
}

TEST_CASE("temporal predictor maps a frame pair to one frame") {
  Rng rng(117);
  const GeneratorSpec s = mini_spec();
  TemporalPredictor p(s, rng);
  Rng data_rng(118);
  Tensor a = rand_image(2, s.image_size, data_rng);
  Tensor b = rand_image(2, s.image_size, data_rng);
  NoGradGuard ng;
  const Tensor out = p.forward(Var(a, false), Var(b, false)).value();
  REQUIRE(out.shape() == std::vector<int>{2, 3, s.image_size, s.image_size});
  CHECK(out.max_abs() <= 1.0);
  CHECK(out.all_finite());
}

TEST_CASE("no-grad forwards do not retain graphs") {
  Rng rng(119);
  const GeneratorSpec s = mini_spec();
  PlainGenerator g(s, rng);
  Rng data_rng(120);
  NoGradGuard ng;
  Var out = g.forward(Var(rand_image(1, s.image_size, data_rng), false));
  CHECK(!out.requires_grad());
  CHECK(out.node()->parents.empty());
}
