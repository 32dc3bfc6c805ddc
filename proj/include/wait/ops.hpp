#pragma once

#include <vector>

#include "wait/autograd.hpp"

namespace wait::ops {

// Elementwise / structural ops on NCHW activations (reductions accept any
// shape). All forward and backward kernels are pure and deterministic.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double negative_slope);
Var tanh(const Var& x);
Var concat_channels(const std::vector<Var>& xs);
Var reflect_pad2d(const Var& x, int pad);
Var upsample_nearest2(const Var& x);
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Scalar-output reductions; summation runs in ascending index order.
Var mean_abs(const Var& x);
Var mean_sq(const Var& x);
Var mean_sq_diff(const Var& x, double target);
// mean(softplus(sign * x)); the stable form of the logistic GAN loss.
Var mean_softplus(const Var& x, double sign);

struct Conv2dSpec {
  int stride = 1;
  int pad = 0;       // zero padding
  int dilation = 1;
};

// Upper bound on im2col scratch buffers; convolutions fall back to chunked
// column processing above it. Mutable so tests can force the chunked path on
// small inputs.
std::int64_t& conv_col_budget_bytes();

// x: (N,Cin,H,W), w: (Cout,Cin,K,K), b: (Cout) or undefined for no bias.
// Output spatial dims follow the usual (H + 2p - d*(K-1) - 1)/s + 1.
Var conv2d(const Var& x, const Var& w, const Var& b, const Conv2dSpec& spec);

// Forward-only helper used by oracles and inference paths.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      const Conv2dSpec& spec);

// Bilinear resize of a (C,H,W) tensor with half-pixel centers and
// edge-clamped taps. Exact identity when the size already matches.
Tensor resize_bilinear(const Tensor& chw, int out_h, int out_w);

}  // namespace wait::ops
