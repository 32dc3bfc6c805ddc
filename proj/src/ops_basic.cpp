#include <algorithm>
#include <cmath>

#include "wait/ops.hpp"

namespace wait::ops {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.value().shape_str() +
                     " vs " + b.value().shape_str());
}

void check_nchw(const Var& x, const char* op) {
  if (x.value().rank() != 4)
    throw ShapeError(std::string(op) + ": expected NCHW tensor, got rank " +
                     std::to_string(x.value().rank()));
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  out.add_(b.value());
  NodePtr pa = a.node(), pb = b.node();
  return make_op_node(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->ensure_grad().add_(self.grad);
    if (pb->requires_grad) pb->ensure_grad().add_(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const double* bd = b.value().data();
  double* od = out.data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) od[i] -= bd[i];
  NodePtr pa = a.node(), pb = b.node();
  return make_op_node(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    const double* g = self.grad.data();
    const std::int64_t m = self.grad.numel();
    if (pa->requires_grad) {
      double* ga = pa->ensure_grad().data();
      for (std::int64_t i = 0; i < m; ++i) ga[i] += g[i];
    }
    if (pb->requires_grad) {
      double* gb = pb->ensure_grad().data();
      for (std::int64_t i = 0; i < m; ++i) gb[i] -= g[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out.scale_(s);
  NodePtr pa = a.node();
  return make_op_node(std::move(out), {pa}, [pa, s](Node& self) {
    if (!pa->requires_grad) return;
    double* ga = pa->ensure_grad().data();
    const double* g = self.grad.data();
    const std::int64_t n = self.grad.numel();
    for (std::int64_t i = 0; i < n; ++i) ga[i] += s * g[i];
  });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  double* od = out.data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i)
    if (od[i] < 0.0) od[i] = 0.0;
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px](Node& self) {
    if (!px->requires_grad) return;
    double* gx = px->ensure_grad().data();
    const double* g = self.grad.data();
    const double* xv = px->value.data();
    const std::int64_t m = self.grad.numel();
    for (std::int64_t i = 0; i < m; ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

Var leaky_relu(const Var& x, double negative_slope) {
  Tensor out = x.value();
  double* od = out.data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i)
    if (od[i] < 0.0) od[i] *= negative_slope;
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, negative_slope](Node& self) {
    if (!px->requires_grad) return;
    double* gx = px->ensure_grad().data();
    const double* g = self.grad.data();
    const double* xv = px->value.data();
    const std::int64_t m = self.grad.numel();
    for (std::int64_t i = 0; i < m; ++i)
      gx[i] += (xv[i] > 0.0 ? g[i] : negative_slope * g[i]);
  });
}

Var tanh(const Var& x) {
  Tensor out = x.value();
  double* od = out.data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) od[i] = std::tanh(od[i]);
  NodePtr px = x.node();
  // dx = dy * (1 - y^2); reads y from this node's value.
  return make_op_node(std::move(out), {px}, [px](Node& self) {
    if (!px->requires_grad) return;
    double* gx = px->ensure_grad().data();
    const double* g = self.grad.data();
    const double* y = self.value.data();
    const std::int64_t m = self.grad.numel();
    for (std::int64_t i = 0; i < m; ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input list");
  check_nchw(xs[0], "concat_channels");
  const int n = xs[0].value().dim(0);
  const int h = xs[0].value().dim(2);
  const int w = xs[0].value().dim(3);
  int c_total = 0;
  for (const auto& x : xs) {
    check_nchw(x, "concat_channels");
    if (x.value().dim(0) != n || x.value().dim(2) != h || x.value().dim(3) != w)
      throw ShapeError("concat_channels: spatial/batch mismatch");
    c_total += x.value().dim(1);
  }
  Tensor out({n, c_total, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<NodePtr> parents;
  parents.reserve(xs.size());
  std::vector<int> channels;
  for (const auto& x : xs) {
    parents.push_back(x.node());
    channels.push_back(x.value().dim(1));
  }
  for (int ni = 0; ni < n; ++ni) {
    int c_off = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const int ck = channels[k];
      const double* src = xs[k].value().data() + static_cast<std::int64_t>(ni) * ck * plane;
      double* dst = out.data() + (static_cast<std::int64_t>(ni) * c_total + c_off) * plane;
      std::copy(src, src + static_cast<std::int64_t>(ck) * plane, dst);
      c_off += ck;
    }
  }
  return make_op_node(std::move(out), parents,
                      [parents, channels, n, c_total, plane](Node& self) {
    const double* g = self.grad.data();
    for (int ni = 0; ni < n; ++ni) {
      int c_off = 0;
      for (std::size_t k = 0; k < parents.size(); ++k) {
        const int ck = channels[k];
        if (parents[k]->requires_grad) {
          double* dst = parents[k]->ensure_grad().data() +
                        static_cast<std::int64_t>(ni) * ck * plane;
          const double* src = g + (static_cast<std::int64_t>(ni) * c_total + c_off) * plane;
          const std::int64_t cnt = static_cast<std::int64_t>(ck) * plane;
          for (std::int64_t i = 0; i < cnt; ++i) dst[i] += src[i];
        }
        c_off += ck;
      }
    }
  });
}

namespace {
// PyTorch-style reflection (edge sample not repeated); requires pad < dim.
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}
}  // namespace

Var reflect_pad2d(const Var& x, int pad) {
  check_nchw(x, "reflect_pad2d");
  const int n = x.value().dim(0), c = x.value().dim(1);
  const int h = x.value().dim(2), w = x.value().dim(3);
  if (pad >= h || pad >= w) throw ShapeError("reflect_pad2d: pad too large for input");
  const int ho = h + 2 * pad, wo = w + 2 * pad;
  Tensor out({n, c, ho, wo});
  const double* src = x.value().data();
  double* dst = out.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const double* sp = src + (static_cast<std::int64_t>(ni) * c + ci) * h * w;
      double* dp = dst + (static_cast<std::int64_t>(ni) * c + ci) * ho * wo;
      for (int oy = 0; oy < ho; ++oy) {
        const int iy = reflect_index(oy - pad, h);
        for (int ox = 0; ox < wo; ++ox)
          dp[static_cast<std::int64_t>(oy) * wo + ox] =
              sp[static_cast<std::int64_t>(iy) * w + reflect_index(ox - pad, w)];
      }
    }
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, pad, n, c, h, w, ho, wo](Node& self) {
    if (!px->requires_grad) return;
    const double* g = self.grad.data();
    double* gx = px->ensure_grad().data();
    for (int ni = 0; ni < n; ++ni)
      for (int ci = 0; ci < c; ++ci) {
        double* dp = gx + (static_cast<std::int64_t>(ni) * c + ci) * h * w;
        const double* sp = g + (static_cast<std::int64_t>(ni) * c + ci) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = reflect_index(oy - pad, h);
          for (int ox = 0; ox < wo; ++ox)
            dp[static_cast<std::int64_t>(iy) * w + reflect_index(ox - pad, w)] +=
                sp[static_cast<std::int64_t>(oy) * wo + ox];
        }
      }
  });
}

Var upsample_nearest2(const Var& x) {
  check_nchw(x, "upsample_nearest2");
  const int n = x.value().dim(0), c = x.value().dim(1);
  const int h = x.value().dim(2), w = x.value().dim(3);
  const int ho = h * 2, wo = w * 2;
  Tensor out({n, c, ho, wo});
  const double* src = x.value().data();
  double* dst = out.data();
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* sp = src + p * h * w;
    double* dp = dst + p * ho * wo;
    for (int oy = 0; oy < ho; ++oy) {
      const double* row = sp + static_cast<std::int64_t>(oy / 2) * w;
      for (int ox = 0; ox < wo; ++ox) dp[static_cast<std::int64_t>(oy) * wo + ox] = row[ox / 2];
    }
  }
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, planes, h, w, ho, wo](Node& self) {
    if (!px->requires_grad) return;
    const double* g = self.grad.data();
    double* gx = px->ensure_grad().data();
    for (std::int64_t p = 0; p < planes; ++p) {
      double* dp = gx + p * h * w;
      const double* sp = g + p * ho * wo;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
          dp[static_cast<std::int64_t>(oy / 2) * w + ox / 2] +=
              sp[static_cast<std::int64_t>(oy) * wo + ox];
    }
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  check_nchw(x, "instance_norm");
  const int n = x.value().dim(0), c = x.value().dim(1);
  const int h = x.value().dim(2), w = x.value().dim(3);
  if (gamma.value().numel() != c || beta.value().numel() != c)
    throw ShapeError("instance_norm: affine parameter size mismatch");
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  if (hw == 0) throw ShapeError("instance_norm: empty spatial dims");

  Tensor out({n, c, h, w});
  // Cached for backward: normalized activations and per-(n,c) 1/sigma.
  auto xhat = std::make_shared<Tensor>(std::vector<int>{n, c, h, w});
  auto inv_std = std::make_shared<Tensor>(std::vector<int>{n, c});

  const double* xd = x.value().data();
  const double* gd = gamma.value().data();
  const double* bd = beta.value().data();
  double* od = out.data();
  double* xh = xhat->data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const std::int64_t base = (static_cast<std::int64_t>(ni) * c + ci) * hw;
      double mean = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) mean += xd[base + i];
      mean /= static_cast<double>(hw);
      double var = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) {
        const double d = xd[base + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(hw);
      const double istd = 1.0 / std::sqrt(var + eps);
      inv_std->at(ni, ci) = istd;
      const double gc = gd[ci], bc = bd[ci];
      for (std::int64_t i = 0; i < hw; ++i) {
        const double v = (xd[base + i] - mean) * istd;
        xh[base + i] = v;
        od[base + i] = gc * v + bc;
      }
    }

  NodePtr px = x.node(), pg = gamma.node(), pb = beta.node();
  if (!any_requires_grad({px, pg, pb}))
    return make_op_node(std::move(out), {px, pg, pb}, nullptr);

  return make_op_node(std::move(out), {px, pg, pb},
                      [px, pg, pb, xhat, inv_std, n, c, hw](Node& self) {
    const double* g = self.grad.data();
    const double* xh2 = xhat->data();
    const double* gd = pg->value.data();
    for (int ni = 0; ni < n; ++ni)
      for (int ci = 0; ci < c; ++ci) {
        const std::int64_t base = (static_cast<std::int64_t>(ni) * c + ci) * hw;
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) {
          sum_g += g[base + i];
          sum_gx += g[base + i] * xh2[base + i];
        }
        if (pg->requires_grad) pg->ensure_grad()[ci] += sum_gx;
        if (pb->requires_grad) pb->ensure_grad()[ci] += sum_g;
        if (px->requires_grad) {
          double* gx = px->ensure_grad().data();
          const double k = gd[ci] * inv_std->at(ni, ci);
          const double mg = sum_g / static_cast<double>(hw);
          const double mgx = sum_gx / static_cast<double>(hw);
          for (std::int64_t i = 0; i < hw; ++i)
            gx[base + i] += k * (g[base + i] - mg - xh2[base + i] * mgx);
        }
      }
  });
}

Var mean_abs(const Var& x) {
  const std::int64_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean_abs: empty tensor");
  const double* xd = x.value().data();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += std::fabs(xd[i]);
  Tensor out({1});
  out[0] = s / static_cast<double>(n);
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, n](Node& self) {
    if (!px->requires_grad) return;
    const double g = self.grad[0] / static_cast<double>(n);
    const double* xv = px->value.data();
    double* gx = px->ensure_grad().data();
    for (std::int64_t i = 0; i < n; ++i)
      gx[i] += xv[i] > 0.0 ? g : (xv[i] < 0.0 ? -g : 0.0);
  });
}

Var mean_sq(const Var& x) {
  const std::int64_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean_sq: empty tensor");
  const double* xd = x.value().data();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += xd[i] * xd[i];
  Tensor out({1});
  out[0] = s / static_cast<double>(n);
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, n](Node& self) {
    if (!px->requires_grad) return;
    const double g = 2.0 * self.grad[0] / static_cast<double>(n);
    const double* xv = px->value.data();
    double* gx = px->ensure_grad().data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g * xv[i];
  });
}

Var mean_sq_diff(const Var& x, double target) {
  const std::int64_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean_sq_diff: empty tensor");
  const double* xd = x.value().data();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = xd[i] - target;
    s += d * d;
  }
  Tensor out({1});
  out[0] = s / static_cast<double>(n);
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, n, target](Node& self) {
    if (!px->requires_grad) return;
    const double g = 2.0 * self.grad[0] / static_cast<double>(n);
    const double* xv = px->value.data();
    double* gx = px->ensure_grad().data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g * (xv[i] - target);
  });
}

Var mean_softplus(const Var& x, double sign) {
  const std::int64_t n = x.value().numel();
  if (n == 0) throw ShapeError("mean_softplus: empty tensor");
  const double* xd = x.value().data();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double z = sign * xd[i];
    // log(1 + e^z) computed without overflow for large |z|.
    s += z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  Tensor out({1});
  out[0] = s / static_cast<double>(n);
  NodePtr px = x.node();
  return make_op_node(std::move(out), {px}, [px, n, sign](Node& self) {
    if (!px->requires_grad) return;
    const double g = self.grad[0] / static_cast<double>(n);
    const double* xv = px->value.data();
    double* gx = px->ensure_grad().data();
    for (std::int64_t i = 0; i < n; ++i) {
      const double z = sign * xv[i];
      const double sig = z > 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      gx[i] += g * sign * sig;
    }
  });
}

namespace {
// Per-axis bilinear taps under the half-pixel-center convention.
struct ResizeAxis {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

ResizeAxis make_resize_axis(int in, int out) {
  ResizeAxis a;
  a.lo.resize(std::size_t(out));
  a.hi.resize(std::size_t(out));
  a.frac.resize(std::size_t(out));
  const double scale = double(in) / double(out);
  for (int o = 0; o < out; ++o) {
    const double s = (o + 0.5) * scale - 0.5;
    const double f = std::floor(s);
    const int i0 = int(f);
    a.lo[std::size_t(o)] = std::clamp(i0, 0, in - 1);
    a.hi[std::size_t(o)] = std::clamp(i0 + 1, 0, in - 1);
    a.frac[std::size_t(o)] = s - f;
  }
  return a;
}
}  // namespace

Tensor resize_bilinear(const Tensor& chw, int out_h, int out_w) {
  if (chw.shape().size() != 3)
    throw ShapeError("resize_bilinear: want (C,H,W), got " + chw.shape_str());
  if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: output size must be >= 1");
  const int c = chw.shape()[0], h = chw.shape()[1], w = chw.shape()[2];
  if (h == out_h && w == out_w) return chw;

  const ResizeAxis ay = make_resize_axis(h, out_h);
  const ResizeAxis ax = make_resize_axis(w, out_w);
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h; ++oy) {
      const double fy = ay.frac[std::size_t(oy)];
      for (int ox = 0; ox < out_w; ++ox) {
        const double fx = ax.frac[std::size_t(ox)];
        const double v00 = chw.at(ch, ay.lo[std::size_t(oy)], ax.lo[std::size_t(ox)]);
        const double v01 = chw.at(ch, ay.lo[std::size_t(oy)], ax.hi[std::size_t(ox)]);
        const double v10 = chw.at(ch, ay.hi[std::size_t(oy)], ax.lo[std::size_t(ox)]);
        const double v11 = chw.at(ch, ay.hi[std::size_t(oy)], ax.hi[std::size_t(ox)]);
        const double top = v00 + fx * (v01 - v00);
        const double bot = v10 + fx * (v11 - v10);
        out.at(ch, oy, ox) = top + fy * (bot - top);
      }
    }
  return out;
}

}  // namespace wait::ops
