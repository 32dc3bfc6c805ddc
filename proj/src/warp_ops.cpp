#include "wait/warp_ops.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "col_chunk.hpp"

namespace wait::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Corner geometry of one bilinear sample, shared across channels.
struct Taps {
  int x0, y0;
  double fx, fy;
  // Corner order: (x0,y0) (x1,y0) (x0,y1) (x1,y1).
  double wgt[4];
  bool in[4];
};

inline Taps make_taps(double x, double y, int w, int h) {
  Taps t;
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  t.x0 = static_cast<int>(fx0);
  t.y0 = static_cast<int>(fy0);
  t.fx = x - fx0;
  t.fy = y - fy0;
  t.wgt[0] = (1.0 - t.fx) * (1.0 - t.fy);
  t.wgt[1] = t.fx * (1.0 - t.fy);
  t.wgt[2] = (1.0 - t.fx) * t.fy;
  t.wgt[3] = t.fx * t.fy;
  const bool x0_in = t.x0 >= 0 && t.x0 < w;
  const bool x1_in = t.x0 + 1 >= 0 && t.x0 + 1 < w;
  const bool y0_in = t.y0 >= 0 && t.y0 < h;
  const bool y1_in = t.y0 + 1 >= 0 && t.y0 + 1 < h;
  t.in[0] = x0_in && y0_in;
  t.in[1] = x1_in && y0_in;
  t.in[2] = x0_in && y1_in;
  t.in[3] = x1_in && y1_in;
  return t;
}

inline double sample_plane(const double* plane, int w, const Taps& t) {
  double v = 0.0;
  if (t.in[0]) v += t.wgt[0] * plane[static_cast<std::int64_t>(t.y0) * w + t.x0];
  if (t.in[1]) v += t.wgt[1] * plane[static_cast<std::int64_t>(t.y0) * w + t.x0 + 1];
  if (t.in[2]) v += t.wgt[2] * plane[static_cast<std::int64_t>(t.y0 + 1) * w + t.x0];
  if (t.in[3]) v += t.wgt[3] * plane[static_cast<std::int64_t>(t.y0 + 1) * w + t.x0 + 1];
  return v;
}

// d(sample)/dx and d(sample)/dy of the piecewise-bilinear function, with the
// zero-padded exterior treated as zero-valued cells.
inline void sample_plane_grad(const double* plane, int w, const Taps& t, double* dx,
                              double* dy) {
  const double v00 = t.in[0] ? plane[static_cast<std::int64_t>(t.y0) * w + t.x0] : 0.0;
  const double v10 = t.in[1] ? plane[static_cast<std::int64_t>(t.y0) * w + t.x0 + 1] : 0.0;
  const double v01 = t.in[2] ? plane[static_cast<std::int64_t>(t.y0 + 1) * w + t.x0] : 0.0;
  const double v11 = t.in[3] ? plane[static_cast<std::int64_t>(t.y0 + 1) * w + t.x0 + 1] : 0.0;
  *dx = (1.0 - t.fy) * (v10 - v00) + t.fy * (v11 - v01);
  *dy = (1.0 - t.fx) * (v01 - v00) + t.fx * (v11 - v10);
}

inline void scatter_plane(double* plane, int w, const Taps& t, double g) {
  if (t.in[0]) plane[static_cast<std::int64_t>(t.y0) * w + t.x0] += t.wgt[0] * g;
  if (t.in[1]) plane[static_cast<std::int64_t>(t.y0) * w + t.x0 + 1] += t.wgt[1] * g;
  if (t.in[2]) plane[static_cast<std::int64_t>(t.y0 + 1) * w + t.x0] += t.wgt[2] * g;
  if (t.in[3]) plane[static_cast<std::int64_t>(t.y0 + 1) * w + t.x0 + 1] += t.wgt[3] * g;
}

constexpr int kDeformK = 3;
constexpr int kDeformTaps = kDeformK * kDeformK;
constexpr int kOffsetChannels = 2 * kDeformTaps;

struct DeformDims {
  int n, cin, h, w, cout;
  std::int64_t plane;        // h*w
  std::int64_t col_rows;     // cin*9
};

DeformDims deform_dims(const Tensor& x, const Tensor& offsets, const Tensor& w,
                       const Tensor& b) {
  if (x.rank() != 4 || offsets.rank() != 4)
    throw ShapeError("deformable_conv2d: inputs must be NCHW");
  if (w.rank() != 4 || w.dim(2) != kDeformK || w.dim(3) != kDeformK)
    throw ShapeError("deformable_conv2d: weight must be (Cout,Cin,3,3)");
  if (offsets.dim(1) != kOffsetChannels)
    throw ShapeError("deformable_conv2d: offsets must have 18 channels, got " +
                     std::to_string(offsets.dim(1)));
  if (offsets.dim(0) != x.dim(0) || offsets.dim(2) != x.dim(2) || offsets.dim(3) != x.dim(3))
    throw ShapeError("deformable_conv2d: offset spatial dims must match input");
  if (w.dim(1) != x.dim(1)) throw ShapeError("deformable_conv2d: channel mismatch");
  if (b.defined() && b.numel() != w.dim(0))
    throw ShapeError("deformable_conv2d: bias size mismatch");
  DeformDims d;
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.plane = static_cast<std::int64_t>(d.h) * d.w;
  d.col_rows = static_cast<std::int64_t>(d.cin) * kDeformTaps;
  return d;
}

// Sampled-im2col for output positions p in [p0, p0+pc):
// col(c*9+k, p-p0) = bilinear(x_c, p + grid(k) + offset_k(p)).
void deform_im2col_range(const double* x, const double* off, const DeformDims& d,
                         std::int64_t p0, std::int64_t pc, double* col) {
  for (int k = 0; k < kDeformTaps; ++k) {
    const int gy = k / kDeformK - 1;
    const int gx = k % kDeformK - 1;
    const double* off_x = off + static_cast<std::int64_t>(2 * k) * d.plane;
    const double* off_y = off + static_cast<std::int64_t>(2 * k + 1) * d.plane;
    for (std::int64_t p = p0; p < p0 + pc; ++p) {
      const int oy = static_cast<int>(p / d.w);
      const int ox = static_cast<int>(p % d.w);
      const Taps t = make_taps(ox + gx + off_x[p], oy + gy + off_y[p], d.w, d.h);
      for (int c = 0; c < d.cin; ++c)
        col[(static_cast<std::int64_t>(c) * kDeformTaps + k) * pc + (p - p0)] =
            sample_plane(x + static_cast<std::int64_t>(c) * d.plane, d.w, t);
    }
  }
}

}  // namespace

void bilinear_sample(const Tensor& map, double x, double y, double* out_cvec) {
  if (map.rank() != 3) throw ShapeError("bilinear_sample: map must be (C,H,W)");
  const int c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const Taps t = make_taps(x, y, w, h);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (int ci = 0; ci < c; ++ci) out_cvec[ci] = sample_plane(map.data() + ci * plane, w, t);
}

Tensor deformable_conv2d_forward(const Tensor& x, const Tensor& offsets, const Tensor& w,
                                 const Tensor& b) {
  const DeformDims d = deform_dims(x, offsets, w, b);
  Tensor out({d.n, d.cout, d.h, d.w});
  const std::int64_t chunk = col_chunk_cols(d.col_rows, d.plane);
  std::vector<double> col(static_cast<std::size_t>(d.col_rows * chunk));
  ConstMapMat wmat(w.data(), d.cout, d.col_rows);
  for (int ni = 0; ni < d.n; ++ni) {
    MapMat omat(out.data() + static_cast<std::int64_t>(ni) * d.cout * d.plane, d.cout, d.plane);
    for (std::int64_t p0 = 0; p0 < d.plane; p0 += chunk) {
      const std::int64_t pc = std::min(chunk, d.plane - p0);
      deform_im2col_range(x.data() + static_cast<std::int64_t>(ni) * d.cin * d.plane,
                          offsets.data() + static_cast<std::int64_t>(ni) * kOffsetChannels *
                                               d.plane,
                          d, p0, pc, col.data());
      ConstMapMat cmat(col.data(), d.col_rows, pc);
      omat.middleCols(p0, pc).noalias() = wmat * cmat;
    }
    if (b.defined())
      for (int co = 0; co < d.cout; ++co) omat.row(co).array() += b[co];
  }
  return out;
}

Var deformable_conv2d(const Var& x, const Var& offsets, const Var& w, const Var& b) {
  Tensor out = deformable_conv2d_forward(x.value(), offsets.value(), w.value(),
                                         b.defined() ? b.value() : Tensor());
  NodePtr px = x.node(), po = offsets.node(), pw = w.node();
  NodePtr pb = b.defined() ? b.node() : nullptr;
  std::vector<NodePtr> parents = pb ? std::vector<NodePtr>{px, po, pw, pb}
                                    : std::vector<NodePtr>{px, po, pw};
  if (!any_requires_grad(parents)) return make_op_node(std::move(out), parents, nullptr);

  return make_op_node(std::move(out), parents, [px, po, pw, pb](Node& self) {
    const DeformDims d =
        deform_dims(px->value, po->value, pw->value, pb ? pb->value : Tensor());
    const bool need_x = px->requires_grad;
    const bool need_o = po->requires_grad;
    const bool need_w = pw->requires_grad;
    const bool need_b = pb && pb->requires_grad;

    const std::int64_t chunk = col_chunk_cols(d.col_rows, d.plane);
    std::vector<double> col;
    std::vector<double> gcol(static_cast<std::size_t>(d.col_rows * chunk));
    if (need_w) col.resize(static_cast<std::size_t>(d.col_rows * chunk));
    ConstMapMat wmat(pw->value.data(), d.cout, d.col_rows);

    for (int ni = 0; ni < d.n; ++ni) {
      const double* xv = px->value.data() + static_cast<std::int64_t>(ni) * d.cin * d.plane;
      const double* off =
          po->value.data() + static_cast<std::int64_t>(ni) * kOffsetChannels * d.plane;
      ConstMapMat gmat(self.grad.data() + static_cast<std::int64_t>(ni) * d.cout * d.plane,
                       d.cout, d.plane);
      if (need_b) {
        double* gb = pb->ensure_grad().data();
        for (int co = 0; co < d.cout; ++co) gb[co] += gmat.row(co).sum();
      }
      double* gx = need_x
                       ? px->ensure_grad().data() + static_cast<std::int64_t>(ni) * d.cin * d.plane
                       : nullptr;
      double* go = need_o ? po->ensure_grad().data() +
                                static_cast<std::int64_t>(ni) * kOffsetChannels * d.plane
                          : nullptr;

      for (std::int64_t p0 = 0; p0 < d.plane; p0 += chunk) {
        const std::int64_t pc = std::min(chunk, d.plane - p0);
        if (need_w) {
          deform_im2col_range(xv, off, d, p0, pc, col.data());
          ConstMapMat cmat(col.data(), d.col_rows, pc);
          MapMat gw(pw->ensure_grad().data(), d.cout, d.col_rows);
          gw.noalias() += gmat.middleCols(p0, pc) * cmat.transpose();
        }
        if (!need_x && !need_o) continue;

        // gcol(c*9+k, p-p0) = sum_cout dOut(cout,p) * w(cout, c*9+k)
        MapMat gc(gcol.data(), d.col_rows, pc);
        gc.noalias() = wmat.transpose() * gmat.middleCols(p0, pc);

        for (int k = 0; k < kDeformTaps; ++k) {
          const int gy = k / kDeformK - 1;
          const int gxs = k % kDeformK - 1;
          const double* off_x = off + static_cast<std::int64_t>(2 * k) * d.plane;
          const double* off_y = off + static_cast<std::int64_t>(2 * k + 1) * d.plane;
          for (std::int64_t p = p0; p < p0 + pc; ++p) {
            const int oy = static_cast<int>(p / d.w);
            const int ox = static_cast<int>(p % d.w);
            const Taps t = make_taps(ox + gxs + off_x[p], oy + gy + off_y[p], d.w, d.h);
            double acc_dx = 0.0, acc_dy = 0.0;
            for (int c = 0; c < d.cin; ++c) {
              const double g = gcol[(static_cast<std::int64_t>(c) * kDeformTaps + k) * pc +
                                    (p - p0)];
              if (g == 0.0) continue;
              const double* plane = xv + static_cast<std::int64_t>(c) * d.plane;
              if (need_x)
                scatter_plane(gx + static_cast<std::int64_t>(c) * d.plane, d.w, t, g);
              if (need_o) {
                double dsx, dsy;
                sample_plane_grad(plane, d.w, t, &dsx, &dsy);
                acc_dx += g * dsx;
                acc_dy += g * dsy;
              }
            }
            if (need_o) {
              go[static_cast<std::int64_t>(2 * k) * d.plane + p] += acc_dx;
              go[static_cast<std::int64_t>(2 * k + 1) * d.plane + p] += acc_dy;
            }
          }
        }
      }
    }
  });
}

Tensor flow_warp_forward(const Tensor& image, const Tensor& flow) {
  if (image.rank() != 3 || flow.rank() != 3 || flow.dim(0) != 2)
    throw ShapeError("flow_warp_forward: expected (C,H,W) image and (2,H,W) flow");
  if (flow.dim(1) != image.dim(1) || flow.dim(2) != image.dim(2))
    throw ShapeError("flow_warp_forward: image/flow spatial mismatch");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor out({c, h, w});
  const double* u = flow.data();
  const double* v = flow.data() + plane;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::int64_t p = static_cast<std::int64_t>(y) * w + x;
      const Taps t = make_taps(x + u[p], y + v[p], w, h);
      for (int ci = 0; ci < c; ++ci)
        out.data()[ci * plane + p] = sample_plane(image.data() + ci * plane, w, t);
    }
  return out;
}

Var flow_warp(const Var& image, const Var& flow) {
  const Tensor& img = image.value();
  const Tensor& fl = flow.value();
  if (img.rank() != 4 || fl.rank() != 4 || fl.dim(1) != 2)
    throw ShapeError("flow_warp: expected NCHW image and (N,2,H,W) flow");
  if (fl.dim(0) != img.dim(0) || fl.dim(2) != img.dim(2) || fl.dim(3) != img.dim(3))
    throw ShapeError("flow_warp: image/flow shape mismatch, image " + img.shape_str() +
                     " flow " + fl.shape_str());
  const int n = img.dim(0), c = img.dim(1), h = img.dim(2), w = img.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;

  Tensor out({n, c, h, w});
  for (int ni = 0; ni < n; ++ni) {
    const double* xv = img.data() + static_cast<std::int64_t>(ni) * c * plane;
    const double* u = fl.data() + static_cast<std::int64_t>(ni) * 2 * plane;
    const double* v = u + plane;
    double* od = out.data() + static_cast<std::int64_t>(ni) * c * plane;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::int64_t p = static_cast<std::int64_t>(y) * w + x;
        const Taps t = make_taps(x + u[p], y + v[p], w, h);
        for (int ci = 0; ci < c; ++ci) od[ci * plane + p] = sample_plane(xv + ci * plane, w, t);
      }
  }

  NodePtr pi = image.node(), pf = flow.node();
  if (!any_requires_grad({pi, pf})) return make_op_node(std::move(out), {pi, pf}, nullptr);

  return make_op_node(std::move(out), {pi, pf}, [pi, pf, n, c, h, w, plane](Node& self) {
    const bool need_i = pi->requires_grad;
    const bool need_f = pf->requires_grad;
    for (int ni = 0; ni < n; ++ni) {
      const double* xv = pi->value.data() + static_cast<std::int64_t>(ni) * c * plane;
      const double* u = pf->value.data() + static_cast<std::int64_t>(ni) * 2 * plane;
      const double* v = u + plane;
      const double* g = self.grad.data() + static_cast<std::int64_t>(ni) * c * plane;
      double* gi = need_i ? pi->ensure_grad().data() + static_cast<std::int64_t>(ni) * c * plane
                          : nullptr;
      double* gf = need_f ? pf->ensure_grad().data() + static_cast<std::int64_t>(ni) * 2 * plane
                          : nullptr;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::int64_t p = static_cast<std::int64_t>(y) * w + x;
          const Taps t = make_taps(x + u[p], y + v[p], w, h);
          double acc_dx = 0.0, acc_dy = 0.0;
          for (int ci = 0; ci < c; ++ci) {
            const double gv = g[ci * plane + p];
            if (gv == 0.0) continue;
            if (need_i) scatter_plane(gi + ci * plane, w, t, gv);
            if (need_f) {
              double dsx, dsy;
              sample_plane_grad(xv + ci * plane, w, t, &dsx, &dsy);
              acc_dx += gv * dsx;
              acc_dy += gv * dsy;
            }
          }
          if (need_f) {
            gf[p] += acc_dx;
            gf[plane + p] += acc_dy;
          }
        }
    }
  });
}

bool flow_consistency_occluded(double u, double v, double u_hat, double v_hat) {
  const double sx = u + u_hat, sy = v + v_hat;
  const double lhs = sx * sx + sy * sy;
  const double rhs = 0.01 * (u * u + v * v + u_hat * u_hat + v_hat * v_hat) + 0.5;
  return lhs > rhs;
}

bool motion_boundary_occluded(double grad_sq, double flow_sq) {
  return grad_sq > 0.01 * flow_sq + 0.002;
}

namespace {
// One-sided differences at the borders, central in the interior.
inline double plane_dx(const double* p, int w, int /*h*/, int y, int x) {
  const std::int64_t row = static_cast<std::int64_t>(y) * w;
  if (x == 0) return p[row + 1] - p[row];
  if (x == w - 1) return p[row + x] - p[row + x - 1];
  return 0.5 * (p[row + x + 1] - p[row + x - 1]);
}
inline double plane_dy(const double* p, int w, int h, int y, int x) {
  if (y == 0) return p[static_cast<std::int64_t>(w) + x] - p[x];
  if (y == h - 1)
    return p[static_cast<std::int64_t>(y) * w + x] - p[static_cast<std::int64_t>(y - 1) * w + x];
  return 0.5 * (p[static_cast<std::int64_t>(y + 1) * w + x] -
                p[static_cast<std::int64_t>(y - 1) * w + x]);
}
}  // namespace

Tensor occlusion_mask(const Tensor& forward_flow, const Tensor& backward_flow) {
  if (forward_flow.rank() != 3 || forward_flow.dim(0) != 2)
    throw ShapeError("occlusion_mask: forward flow must be (2,H,W)");
  if (!forward_flow.same_shape(backward_flow))
    throw ShapeError("occlusion_mask: flow shape mismatch");
  const int h = forward_flow.dim(1), w = forward_flow.dim(2);
  if (w < 2 || h < 2) throw ShapeError("occlusion_mask: flow field too small");
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const double* fu = forward_flow.data();
  const double* fv = fu + plane;

  const Tensor warped_back = flow_warp_forward(backward_flow, forward_flow);
  const double* bu = warped_back.data();
  const double* bv = bu + plane;

  Tensor mask({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::int64_t p = static_cast<std::int64_t>(y) * w + x;
      const double u = fu[p], v = fv[p];
      bool occluded = flow_consistency_occluded(u, v, bu[p], bv[p]);
      if (!occluded) {
        const double gux = plane_dx(fu, w, h, y, x), guy = plane_dy(fu, w, h, y, x);
        const double gvx = plane_dx(fv, w, h, y, x), gvy = plane_dy(fv, w, h, y, x);
        occluded = motion_boundary_occluded(gux * gux + guy * guy + gvx * gvx + gvy * gvy,
                                            u * u + v * v);
      }
      mask.data()[p] = occluded ? 0.0 : 1.0;
    }
  return mask;
}

}  // namespace wait::ops
