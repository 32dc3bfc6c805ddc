#include <Eigen/Dense>

#include "col_chunk.hpp"
#include "wait/ops.hpp"

namespace wait::ops {

std::int64_t& conv_col_budget_bytes() {
  static std::int64_t budget = 64ll << 20;
  return budget;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvDims {
  int n, cin, h, w;
  int cout, k;
  int ho, wo;
  std::int64_t cols;  // ho*wo
  std::int64_t rows;  // cin*k*k
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Conv2dSpec& s) {
  if (x.rank() != 4) throw ShapeError("conv2d: input must be NCHW");
  if (w.rank() != 4) throw ShapeError("conv2d: weight must be (Cout,Cin,K,K)");
  if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d: only square kernels supported");
  if (x.dim(1) != w.dim(1))
    throw ShapeError("conv2d: channel mismatch, input " + x.shape_str() + " weight " +
                     w.shape_str());
  if (s.stride < 1 || s.dilation < 1 || s.pad < 0)
    throw ShapeError("conv2d: invalid stride/dilation/pad");
  ConvDims d;
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.k = w.dim(2);
  const int eff = s.dilation * (d.k - 1) + 1;
  d.ho = (d.h + 2 * s.pad - eff) / s.stride + 1;
  d.wo = (d.w + 2 * s.pad - eff) / s.stride + 1;
  if (d.ho <= 0 || d.wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  d.cols = static_cast<std::int64_t>(d.ho) * d.wo;
  d.rows = static_cast<std::int64_t>(d.cin) * d.k * d.k;
  return d;
}

// col(r = (c*K+ki)*K+kj, p - p0) = x_padded(c, oy*s - pad + ki*dil, ox*s - pad + kj*dil)
// for output positions p in [p0, p0+pc).
void im2col_range(const double* x, const ConvDims& d, const Conv2dSpec& s, std::int64_t p0,
                  std::int64_t pc, double* col) {
  for (int c = 0; c < d.cin; ++c) {
    const double* xp = x + static_cast<std::int64_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.k; ++ki)
      for (int kj = 0; kj < d.k; ++kj) {
        double* row = col + ((static_cast<std::int64_t>(c) * d.k + ki) * d.k + kj) * pc;
        for (std::int64_t p = p0; p < p0 + pc;) {
          const int oy = static_cast<int>(p / d.wo);
          const int ox0 = static_cast<int>(p % d.wo);
          const std::int64_t run = std::min<std::int64_t>(d.wo - ox0, p0 + pc - p);
          double* out_row = row + (p - p0);
          const int iy = oy * s.stride - s.pad + ki * s.dilation;
          if (iy < 0 || iy >= d.h) {
            std::fill(out_row, out_row + run, 0.0);
          } else {
            const double* in_row = xp + static_cast<std::int64_t>(iy) * d.w;
            for (std::int64_t r = 0; r < run; ++r) {
              const int ix = (ox0 + static_cast<int>(r)) * s.stride - s.pad + kj * s.dilation;
              out_row[r] = (ix >= 0 && ix < d.w) ? in_row[ix] : 0.0;
            }
          }
          p += run;
        }
      }
  }
}

void col2im_accum_range(const double* col, const ConvDims& d, const Conv2dSpec& s,
                        std::int64_t p0, std::int64_t pc, double* gx) {
  for (int c = 0; c < d.cin; ++c) {
    double* xp = gx + static_cast<std::int64_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.k; ++ki)
      for (int kj = 0; kj < d.k; ++kj) {
        const double* row = col + ((static_cast<std::int64_t>(c) * d.k + ki) * d.k + kj) * pc;
        for (std::int64_t p = p0; p < p0 + pc;) {
          const int oy = static_cast<int>(p / d.wo);
          const int ox0 = static_cast<int>(p % d.wo);
          const std::int64_t run = std::min<std::int64_t>(d.wo - ox0, p0 + pc - p);
          const int iy = oy * s.stride - s.pad + ki * s.dilation;
          if (iy >= 0 && iy < d.h) {
            const double* in_row = row + (p - p0);
            double* out_row = xp + static_cast<std::int64_t>(iy) * d.w;
            for (std::int64_t r = 0; r < run; ++r) {
              const int ix = (ox0 + static_cast<int>(r)) * s.stride - s.pad + kj * s.dilation;
              if (ix >= 0 && ix < d.w) out_row[ix] += in_row[r];
            }
          }
          p += run;
        }
      }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      const Conv2dSpec& spec) {
  const ConvDims d = conv_dims(x, w, spec);
  const bool has_bias = b.defined();
  if (has_bias && b.numel() != d.cout) throw ShapeError("conv2d: bias size mismatch");

  Tensor out({d.n, d.cout, d.ho, d.wo});
  const std::int64_t chunk = col_chunk_cols(d.rows, d.cols);
  std::vector<double> col(static_cast<std::size_t>(d.rows * chunk));
  ConstMapMat wmat(w.data(), d.cout, d.rows);
  for (int ni = 0; ni < d.n; ++ni) {
    MapMat omat(out.data() + static_cast<std::int64_t>(ni) * d.cout * d.cols, d.cout, d.cols);
    for (std::int64_t p0 = 0; p0 < d.cols; p0 += chunk) {
      const std::int64_t pc = std::min(chunk, d.cols - p0);
      im2col_range(x.data() + static_cast<std::int64_t>(ni) * d.cin * d.h * d.w, d, spec, p0, pc,
                   col.data());
      ConstMapMat cmat(col.data(), d.rows, pc);
      omat.middleCols(p0, pc).noalias() = wmat * cmat;
    }
    if (has_bias)
      for (int co = 0; co < d.cout; ++co) omat.row(co).array() += b[co];
  }
  return out;
}

Var conv2d(const Var& x, const Var& w, const Var& b, const Conv2dSpec& spec) {
  Tensor out = conv2d_forward(x.value(), w.value(), b.defined() ? b.value() : Tensor(), spec);
  NodePtr px = x.node(), pw = w.node(), pb = b.defined() ? b.node() : nullptr;
  std::vector<NodePtr> parents = pb ? std::vector<NodePtr>{px, pw, pb}
                                    : std::vector<NodePtr>{px, pw};
  if (!any_requires_grad(parents)) return make_op_node(std::move(out), parents, nullptr);

  // The im2col buffer is recomputed in backward rather than cached; at full
  // scale a cached buffer per conv dominates memory.
  return make_op_node(std::move(out), parents, [px, pw, pb, spec](Node& self) {
    const ConvDims d = conv_dims(px->value, pw->value, spec);
    const bool need_x = px->requires_grad;
    const bool need_w = pw->requires_grad;
    const bool need_b = pb && pb->requires_grad;
    const std::int64_t chunk = col_chunk_cols(d.rows, d.cols);
    std::vector<double> col, dcol;
    if (need_w || need_x) col.resize(static_cast<std::size_t>(d.rows * chunk));
    if (need_x) dcol.resize(static_cast<std::size_t>(d.rows * chunk));
    ConstMapMat wmat(pw->value.data(), d.cout, d.rows);

    for (int ni = 0; ni < d.n; ++ni) {
      ConstMapMat gmat(self.grad.data() + static_cast<std::int64_t>(ni) * d.cout * d.cols,
                       d.cout, d.cols);
      if (need_b) {
        double* gb = pb->ensure_grad().data();
        for (int co = 0; co < d.cout; ++co) gb[co] += gmat.row(co).sum();
      }
      if (!need_w && !need_x) continue;
      for (std::int64_t p0 = 0; p0 < d.cols; p0 += chunk) {
        const std::int64_t pc = std::min(chunk, d.cols - p0);
        if (need_w || need_x)
          im2col_range(px->value.data() + static_cast<std::int64_t>(ni) * d.cin * d.h * d.w, d,
                       spec, p0, pc, col.data());
        if (need_w) {
          ConstMapMat cmat(col.data(), d.rows, pc);
          MapMat gw(pw->ensure_grad().data(), d.cout, d.rows);
          gw.noalias() += gmat.middleCols(p0, pc) * cmat.transpose();
        }
        if (need_x) {
          MapMat dc(dcol.data(), d.rows, pc);
          dc.noalias() = wmat.transpose() * gmat.middleCols(p0, pc);
          col2im_accum_range(
              dcol.data(), d, spec, p0, pc,
              px->ensure_grad().data() + static_cast<std::int64_t>(ni) * d.cin * d.h * d.w);
        }
      }
    }
  });
}

}  // namespace wait::ops
