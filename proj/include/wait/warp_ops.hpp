#pragma once

#include <vector>

#include "wait/autograd.hpp"

namespace wait::ops {

// Bilinear interpolation of a (C,H,W) map at continuous (x, y). Samples
// outside [0,W-1]x[0,H-1] use zero padding: out-of-range corner
// contributions are dropped. Total function, never throws.
void bilinear_sample(const Tensor& map, double x, double y, double* out_cvec);

// Deformable 3x3 convolution (offset-only, no modulation mask).
//   x:       (N,Cin,H,W)
//   offsets: (N,18,H,W), channel pair (2k,2k+1) = (dx,dy) for tap k in
//            row-major stencil order; grid(k) spans {-1,0,1}^2
//   w:       (Cout,Cin,3,3), b: (Cout) or undefined
// Stride 1; sampling at p + grid(k) + offset_k(p) with zero padding
// preserves the H x W spatial dims. Differentiable in x, offsets, w, b.
Var deformable_conv2d(const Var& x, const Var& offsets, const Var& w, const Var& b);
Tensor deformable_conv2d_forward(const Tensor& x, const Tensor& offsets, const Tensor& w,
                                 const Tensor& b);

// Backward warping: out(p) = bilinear_sample(image, p + flow(p)).
// image: (N,C,H,W), flow: (N,2,H,W) with channel 0 = u (x displacement),
// channel 1 = v (y displacement). Differentiable in image and flow.
Var flow_warp(const Var& image, const Var& flow);
// Unbatched pure variant: image (C,H,W), flow (2,H,W).
Tensor flow_warp_forward(const Tensor& image, const Tensor& flow);

// Forward-backward consistency occlusion estimation. `forward` is the flow
// on the grid being masked, `backward` the reverse-direction flow. With
// w = forward(p) and w_hat = backward sampled at p + w, a pixel is occluded
// when |w + w_hat|^2 > 0.01*(|w|^2 + |w_hat|^2) + 0.5, or at motion
// boundaries where |grad u|^2 + |grad v|^2 > 0.01*|w|^2 + 0.002.
// Returns an (H,W) mask, 1 = non-occluded. Flow gradients use central
// differences in the interior and one-sided differences at the borders.
Tensor occlusion_mask(const Tensor& forward_flow, const Tensor& backward_flow);

// The two threshold predicates, exposed for property tests.
bool flow_consistency_occluded(double u, double v, double u_hat, double v_hat);
bool motion_boundary_occluded(double grad_sq, double flow_sq);

}  // namespace wait::ops
