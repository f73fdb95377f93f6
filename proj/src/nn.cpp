#include "lseg/nn.hpp"

#include <algorithm>
#include <cmath>

#include "lseg/errors.hpp"

namespace lseg::nn {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ConfigError("Tensor: non-positive dimension");
    n *= static_cast<size_t>(d);
  }
  data.assign(n, 0.0);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data[0] = v;
  return t;
}

int Tensor::numel() const { return static_cast<int>(data.size()); }

int conv_out_size(int in, int kernel, int stride, int dilation, int pad) {
  int span = dilation * (kernel - 1) + 1;
  int out = (in + 2 * pad - span) / stride + 1;
  if (out <= 0) throw ConfigError("conv: output size would be non-positive");
  return out;
}

void Graph::backward(const NodePtr& loss) {
  if (loss->value.numel() != 1) throw ConfigError("backward: loss must be scalar");
  loss->grad.data[0] = 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

namespace {

void expect(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

NodePtr Graph::conv2d(NodePtr x, NodePtr w, NodePtr b, int stride, int dilation, int pad) {
  expect(x->value.ndim() == 3 && w->value.ndim() == 4 && b->value.ndim() == 1,
         "conv2d: expects x(C,H,W), w(Co,Ci,kh,kw), b(Co)");
  const int ci = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
  const int co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  expect(w->value.dim(1) == ci, "conv2d: in-channel mismatch");
  expect(b->value.dim(0) == co, "conv2d: bias size mismatch");
  expect(stride >= 1 && dilation >= 1 && pad >= 0, "conv2d: bad geometry");
  const int ho = conv_out_size(h, kh, stride, dilation, pad);
  const int wo = conv_out_size(wd, kw, stride, dilation, pad);

  auto out = make_node(Tensor::zeros({co, ho, wo}));
  const double* xv = x->value.data.data();
  const double* wv = w->value.data.data();
  double* ov = out->value.data.data();

  auto x_at = [=](int c, int y) { return xv + (static_cast<size_t>(c) * h + y) * wd; };
  auto o_at = [=](int c, int y) { return ov + (static_cast<size_t>(c) * ho + y) * wo; };

  for (int c = 0; c < co; ++c) {
    double bias = b->value.data[c];
    double* orow = ov + static_cast<size_t>(c) * ho * wo;
    std::fill(orow, orow + static_cast<size_t>(ho) * wo, bias);
  }
  // per-tap bounds: xi = xo*stride - pad + k*dilation must stay in range
  auto lo_bound = [pad, dilation, stride](int k) {
    int off = pad - k * dilation;
    return off <= 0 ? 0 : (off + stride - 1) / stride;
  };
  auto hi_bound = [pad, dilation, stride](int k, int extent, int out_extent) {
    int off = extent - 1 - k * dilation + pad;  // max xi index constraint
    if (off < 0) return 0;
    return std::min(out_extent, off / stride + 1);
  };

  for (int oc = 0; oc < co; ++oc)
    for (int icn = 0; icn < ci; ++icn)
      for (int ky = 0; ky < kh; ++ky) {
        const int yo_lo = lo_bound(ky), yo_hi = hi_bound(ky, h, ho);
        for (int kx = 0; kx < kw; ++kx) {
          const double wval =
              wv[((static_cast<size_t>(oc) * ci + icn) * kh + ky) * kw + kx];
          if (wval == 0.0) continue;
          const int xo_lo = lo_bound(kx), xo_hi = hi_bound(kx, wd, wo);
          for (int yo = yo_lo; yo < yo_hi; ++yo) {
            const int yi = yo * stride - pad + ky * dilation;
            const double* xr = x_at(icn, yi) - pad + kx * dilation;
            double* orow = o_at(oc, yo);
            if (stride == 1) {
              for (int xo = xo_lo; xo < xo_hi; ++xo) orow[xo] += wval * xr[xo];
            } else {
              for (int xo = xo_lo; xo < xo_hi; ++xo)
                orow[xo] += wval * xr[static_cast<size_t>(xo) * stride];
            }
          }
        }
      }

  record([x, w, b, out, stride, dilation, pad, ci, h, wd, co, kh, kw, ho, wo, lo_bound,
          hi_bound] {
    const double* gov = out->grad.data.data();
    const double* xv2 = x->value.data.data();
    const double* wv2 = w->value.data.data();
    double* gx = x->grad.data.data();
    double* gw = w->grad.data.data();
    double* gb = b->grad.data.data();

    for (int oc = 0; oc < co; ++oc) {
      const double* grow = gov + static_cast<size_t>(oc) * ho * wo;
      double s = 0;
      for (size_t i = 0; i < static_cast<size_t>(ho) * wo; ++i) s += grow[i];
      gb[oc] += s;
    }
    for (int oc = 0; oc < co; ++oc)
      for (int icn = 0; icn < ci; ++icn)
        for (int ky = 0; ky < kh; ++ky) {
          const int yo_lo = lo_bound(ky), yo_hi = hi_bound(ky, h, ho);
          for (int kx = 0; kx < kw; ++kx) {
            const size_t widx = ((static_cast<size_t>(oc) * ci + icn) * kh + ky) * kw + kx;
            const double wval = wv2[widx];
            const int xo_lo = lo_bound(kx), xo_hi = hi_bound(kx, wd, wo);
            double wacc = 0;
            for (int yo = yo_lo; yo < yo_hi; ++yo) {
              const int yi = yo * stride - pad + ky * dilation;
              const double* xr = xv2 + (static_cast<size_t>(icn) * h + yi) * wd - pad +
                                 kx * dilation;
              double* gxr = gx + (static_cast<size_t>(icn) * h + yi) * wd - pad +
                            kx * dilation;
              const double* grow =
                  out->grad.data.data() + (static_cast<size_t>(oc) * ho + yo) * wo;
              if (stride == 1) {
                for (int xo = xo_lo; xo < xo_hi; ++xo) {
                  wacc += grow[xo] * xr[xo];
                  gxr[xo] += wval * grow[xo];
                }
              } else {
                for (int xo = xo_lo; xo < xo_hi; ++xo) {
                  const size_t xi = static_cast<size_t>(xo) * stride;
                  wacc += grow[xo] * xr[xi];
                  gxr[xi] += wval * grow[xo];
                }
              }
            }
            gw[widx] += wacc;
          }
        }
  });
  return out;
}

NodePtr Graph::conv1d(NodePtr x, NodePtr w, NodePtr b) {
  expect(x->value.ndim() == 1 && w->value.ndim() == 1 && b->value.numel() == 1,
         "conv1d: expects x(C), w(k), b(1)");
  const int c = x->value.dim(0), k = w->value.dim(0);
  expect(k % 2 == 1, "conv1d: kernel size must be odd");
  const int half = k / 2;
  auto out = make_node(Tensor::zeros({c}));
  for (int i = 0; i < c; ++i) {
    double s = b->value.data[0];
    for (int t = 0; t < k; ++t) {
      int j = i + t - half;
      if (j >= 0 && j < c) s += w->value.data[t] * x->value.data[j];
    }
    out->value.data[i] = s;
  }
  record([x, w, b, out, c, k, half] {
    for (int i = 0; i < c; ++i) {
      const double g = out->grad.data[i];
      b->grad.data[0] += g;
      for (int t = 0; t < k; ++t) {
        int j = i + t - half;
        if (j >= 0 && j < c) {
          w->grad.data[t] += g * x->value.data[j];
          x->grad.data[j] += g * w->value.data[t];
        }
      }
    }
  });
  return out;
}

NodePtr Graph::linear(NodePtr x, NodePtr w, NodePtr b) {
  expect(x->value.ndim() == 1 && w->value.ndim() == 2 && b->value.ndim() == 1,
         "linear: expects x(In), w(Out,In), b(Out)");
  const int in = x->value.dim(0), out_n = w->value.dim(0);
  expect(w->value.dim(1) == in && b->value.dim(0) == out_n, "linear: size mismatch");
  auto out = make_node(Tensor::zeros({out_n}));
  for (int o = 0; o < out_n; ++o) {
    double s = b->value.data[o];
    const double* wr = w->value.data.data() + static_cast<size_t>(o) * in;
    for (int i = 0; i < in; ++i) s += wr[i] * x->value.data[i];
    out->value.data[o] = s;
  }
  record([x, w, b, out, in, out_n] {
    for (int o = 0; o < out_n; ++o) {
      const double g = out->grad.data[o];
      b->grad.data[o] += g;
      const double* wr = w->value.data.data() + static_cast<size_t>(o) * in;
      double* gw = w->grad.data.data() + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        gw[i] += g * x->value.data[i];
        x->grad.data[i] += g * wr[i];
      }
    }
  });
  return out;
}

NodePtr Graph::relu(NodePtr x) {
  auto out = make_node(Tensor::zeros(x->value.shape));
  const size_t n = x->value.data.size();
  for (size_t i = 0; i < n; ++i) out->value.data[i] = std::max(0.0, x->value.data[i]);
  record([x, out, n] {
    for (size_t i = 0; i < n; ++i)
      if (x->value.data[i] > 0) x->grad.data[i] += out->grad.data[i];
  });
  return out;
}

NodePtr Graph::sigmoid(NodePtr x) {
  auto out = make_node(Tensor::zeros(x->value.shape));
  const size_t n = x->value.data.size();
  for (size_t i = 0; i < n; ++i) {
    double v = x->value.data[i];
    out->value.data[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                : std::exp(v) / (1.0 + std::exp(v));
  }
  record([x, out, n] {
    for (size_t i = 0; i < n; ++i) {
      double s = out->value.data[i];
      x->grad.data[i] += out->grad.data[i] * s * (1.0 - s);
    }
  });
  return out;
}

NodePtr Graph::add(NodePtr a, NodePtr b) {
  expect(a->value.same_shape(b->value), "add: shape mismatch");
  auto out = make_node(Tensor::zeros(a->value.shape));
  const size_t n = a->value.data.size();
  for (size_t i = 0; i < n; ++i) out->value.data[i] = a->value.data[i] + b->value.data[i];
  record([a, b, out, n] {
    for (size_t i = 0; i < n; ++i) {
      a->grad.data[i] += out->grad.data[i];
      b->grad.data[i] += out->grad.data[i];
    }
  });
  return out;
}

NodePtr Graph::mul(NodePtr a, NodePtr b) {
  expect(a->value.same_shape(b->value), "mul: shape mismatch");
  auto out = make_node(Tensor::zeros(a->value.shape));
  const size_t n = a->value.data.size();
  for (size_t i = 0; i < n; ++i) out->value.data[i] = a->value.data[i] * b->value.data[i];
  record([a, b, out, n] {
    for (size_t i = 0; i < n; ++i) {
      a->grad.data[i] += out->grad.data[i] * b->value.data[i];
      b->grad.data[i] += out->grad.data[i] * a->value.data[i];
    }
  });
  return out;
}

NodePtr Graph::scale_channels(NodePtr x, NodePtr gate) {
  expect(x->value.ndim() == 3 && gate->value.ndim() == 1 &&
             gate->value.dim(0) == x->value.dim(0),
         "scale_channels: expects x(C,H,W), gate(C)");
  const int c = x->value.dim(0);
  const size_t plane = static_cast<size_t>(x->value.dim(1)) * x->value.dim(2);
  auto out = make_node(Tensor::zeros(x->value.shape));
  for (int ch = 0; ch < c; ++ch) {
    const double g = gate->value.data[ch];
    const double* xs = x->value.data.data() + ch * plane;
    double* os = out->value.data.data() + ch * plane;
    for (size_t i = 0; i < plane; ++i) os[i] = xs[i] * g;
  }
  record([x, gate, out, c, plane] {
    for (int ch = 0; ch < c; ++ch) {
      const double g = gate->value.data[ch];
      const double* go = out->grad.data.data() + ch * plane;
      const double* xs = x->value.data.data() + ch * plane;
      double* gx = x->grad.data.data() + ch * plane;
      double acc = 0;
      for (size_t i = 0; i < plane; ++i) {
        gx[i] += go[i] * g;
        acc += go[i] * xs[i];
      }
      gate->grad.data[ch] += acc;
    }
  });
  return out;
}

NodePtr Graph::scale_spatial(NodePtr x, NodePtr map) {
  expect(x->value.ndim() == 3 && map->value.ndim() == 2 &&
             map->value.dim(0) == x->value.dim(1) && map->value.dim(1) == x->value.dim(2),
         "scale_spatial: expects x(C,H,W), map(H,W)");
  const int c = x->value.dim(0);
  const size_t plane = map->value.data.size();
  auto out = make_node(Tensor::zeros(x->value.shape));
  for (int ch = 0; ch < c; ++ch) {
    const double* xs = x->value.data.data() + ch * plane;
    double* os = out->value.data.data() + ch * plane;
    for (size_t i = 0; i < plane; ++i) os[i] = xs[i] * map->value.data[i];
  }
  record([x, map, out, c, plane] {
    for (int ch = 0; ch < c; ++ch) {
      const double* go = out->grad.data.data() + ch * plane;
      const double* xs = x->value.data.data() + ch * plane;
      double* gx = x->grad.data.data() + ch * plane;
      for (size_t i = 0; i < plane; ++i) {
        gx[i] += go[i] * map->value.data[i];
        map->grad.data[i] += go[i] * xs[i];
      }
    }
  });
  return out;
}

NodePtr Graph::scale_by_scalar(NodePtr x, NodePtr s) {
  expect(s->value.numel() == 1, "scale_by_scalar: scale must be a single value");
  auto out = make_node(Tensor::zeros(x->value.shape));
  const size_t n = x->value.data.size();
  const double sv = s->value.data[0];
  for (size_t i = 0; i < n; ++i) out->value.data[i] = x->value.data[i] * sv;
  record([x, s, out, n] {
    const double sv2 = s->value.data[0];
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
      x->grad.data[i] += out->grad.data[i] * sv2;
      acc += out->grad.data[i] * x->value.data[i];
    }
    s->grad.data[0] += acc;
  });
  return out;
}

NodePtr Graph::scale_const(NodePtr x, double a) {
  auto out = make_node(Tensor::zeros(x->value.shape));
  const size_t n = x->value.data.size();
  for (size_t i = 0; i < n; ++i) out->value.data[i] = x->value.data[i] * a;
  record([x, out, n, a] {
    for (size_t i = 0; i < n; ++i) x->grad.data[i] += out->grad.data[i] * a;
  });
  return out;
}

NodePtr Graph::global_avg_pool(NodePtr x) {
  expect(x->value.ndim() == 3, "global_avg_pool: expects (C,H,W)");
  const int c = x->value.dim(0);
  const size_t plane = static_cast<size_t>(x->value.dim(1)) * x->value.dim(2);
  auto out = make_node(Tensor::zeros({c}));
  for (int ch = 0; ch < c; ++ch) {
    const double* xs = x->value.data.data() + ch * plane;
    double s = 0;
    for (size_t i = 0; i < plane; ++i) s += xs[i];
    out->value.data[ch] = s / static_cast<double>(plane);
  }
  record([x, out, c, plane] {
    for (int ch = 0; ch < c; ++ch) {
      const double g = out->grad.data[ch] / static_cast<double>(plane);
      double* gx = x->grad.data.data() + ch * plane;
      for (size_t i = 0; i < plane; ++i) gx[i] += g;
    }
  });
  return out;
}

NodePtr Graph::channel_mean(NodePtr x) {
  expect(x->value.ndim() == 3, "channel_mean: expects (C,H,W)");
  const int c = x->value.dim(0);
  const size_t plane = static_cast<size_t>(x->value.dim(1)) * x->value.dim(2);
  auto out = make_node(Tensor::zeros({x->value.dim(1), x->value.dim(2)}));
  for (int ch = 0; ch < c; ++ch) {
    const double* xs = x->value.data.data() + ch * plane;
    for (size_t i = 0; i < plane; ++i) out->value.data[i] += xs[i];
  }
  for (size_t i = 0; i < plane; ++i) out->value.data[i] /= static_cast<double>(c);
  record([x, out, c, plane] {
    for (int ch = 0; ch < c; ++ch) {
      double* gx = x->grad.data.data() + ch * plane;
      for (size_t i = 0; i < plane; ++i)
        gx[i] += out->grad.data[i] / static_cast<double>(c);
    }
  });
  return out;
}

NodePtr Graph::minmax_normalize(NodePtr x) {
  expect(x->value.ndim() == 2, "minmax_normalize: expects (H,W)");
  const size_t n = x->value.data.size();
  size_t imin = 0, imax = 0;
  for (size_t i = 1; i < n; ++i) {
    if (x->value.data[i] < x->value.data[imin]) imin = i;
    if (x->value.data[i] > x->value.data[imax]) imax = i;
  }
  const double lo = x->value.data[imin], hi = x->value.data[imax];
  auto out = make_node(Tensor::zeros(x->value.shape));
  const bool degenerate = !(hi > lo);
  if (degenerate) {
    std::fill(out->value.data.begin(), out->value.data.end(), 1.0);
  } else {
    const double inv = 1.0 / (hi - lo);
    for (size_t i = 0; i < n; ++i) out->value.data[i] = (x->value.data[i] - lo) * inv;
  }
  record([x, out, n, imin, imax, lo, hi, degenerate] {
    if (degenerate) return;  // constant output, zero gradient
    // s_i = (x_i - lo) / (hi - lo) with lo = x[imin], hi = x[imax]:
    //   d s_i / d x_i  += 1 / (hi - lo)
    //   d s_i / d lo    = (s_i - 1) / (hi - lo)
    //   d s_i / d hi    = -s_i / (hi - lo)
    const double inv = 1.0 / (hi - lo);
    double acc_min = 0, acc_max = 0;
    for (size_t i = 0; i < n; ++i) {
      const double g = out->grad.data[i];
      x->grad.data[i] += g * inv;
      acc_min += g * (out->value.data[i] - 1.0) * inv;
      acc_max += g * (-out->value.data[i]) * inv;
    }
    x->grad.data[imin] += acc_min;
    x->grad.data[imax] += acc_max;
  });
  return out;
}

NodePtr Graph::upsample_bilinear(NodePtr x, int factor) {
  expect(x->value.ndim() == 3 && factor >= 1, "upsample_bilinear: expects (C,H,W)");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  const int ho = h * factor, wo = w * factor;
  struct Lerp {
    int i0, i1;
    double f;
  };
  auto make_axis = [&](int in, int out) {
    std::vector<Lerp> v(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double s = std::clamp((o + 0.5) * scale - 0.5, 0.0, in - 1.0);
      int i0 = static_cast<int>(s);
      v[o] = {i0, std::min(i0 + 1, in - 1), s - i0};
    }
    return v;
  };
  auto ys = make_axis(h, ho), xs = make_axis(w, wo);

  auto out = make_node(Tensor::zeros({c, ho, wo}));
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = x->value.data.data() + static_cast<size_t>(ch) * h * w;
    double* op = out->value.data.data() + static_cast<size_t>(ch) * ho * wo;
    for (int yo = 0; yo < ho; ++yo) {
      const auto [y0, y1, fy] = ys[yo];
      for (int xo = 0; xo < wo; ++xo) {
        const auto [x0, x1, fx] = xs[xo];
        double top = xp[static_cast<size_t>(y0) * w + x0] * (1 - fx) +
                     xp[static_cast<size_t>(y0) * w + x1] * fx;
        double bot = xp[static_cast<size_t>(y1) * w + x0] * (1 - fx) +
                     xp[static_cast<size_t>(y1) * w + x1] * fx;
        op[static_cast<size_t>(yo) * wo + xo] = top * (1 - fy) + bot * fy;
      }
    }
  }
  record([x, out, c, h, w, ho, wo, ys, xs] {
    for (int ch = 0; ch < c; ++ch) {
      double* gx = x->grad.data.data() + static_cast<size_t>(ch) * h * w;
      const double* go = out->grad.data.data() + static_cast<size_t>(ch) * ho * wo;
      for (int yo = 0; yo < ho; ++yo) {
        const auto [y0, y1, fy] = ys[yo];
        for (int xo = 0; xo < wo; ++xo) {
          const auto [x0, x1, fx] = xs[xo];
          const double g = go[static_cast<size_t>(yo) * wo + xo];
          gx[static_cast<size_t>(y0) * w + x0] += g * (1 - fy) * (1 - fx);
          gx[static_cast<size_t>(y0) * w + x1] += g * (1 - fy) * fx;
          gx[static_cast<size_t>(y1) * w + x0] += g * fy * (1 - fx);
          gx[static_cast<size_t>(y1) * w + x1] += g * fy * fx;
        }
      }
    }
  });
  return out;
}

NodePtr Graph::concat_channels(NodePtr a, NodePtr b) {
  expect(a->value.ndim() == 3 && b->value.ndim() == 3 && a->value.dim(1) == b->value.dim(1) &&
             a->value.dim(2) == b->value.dim(2),
         "concat_channels: spatial shape mismatch");
  const int ca = a->value.dim(0), cb = b->value.dim(0);
  auto out = make_node(Tensor::zeros({ca + cb, a->value.dim(1), a->value.dim(2)}));
  std::copy(a->value.data.begin(), a->value.data.end(), out->value.data.begin());
  std::copy(b->value.data.begin(), b->value.data.end(),
            out->value.data.begin() + a->value.data.size());
  record([a, b, out] {
    const size_t na = a->value.data.size(), nb = b->value.data.size();
    for (size_t i = 0; i < na; ++i) a->grad.data[i] += out->grad.data[i];
    for (size_t i = 0; i < nb; ++i) b->grad.data[i] += out->grad.data[na + i];
  });
  return out;
}

NodePtr Graph::reshape(NodePtr x, std::vector<int> shape) {
  Tensor t(shape);
  expect(t.numel() == x->value.numel(), "reshape: element count mismatch");
  t.data = x->value.data;
  auto out = make_node(std::move(t));
  record([x, out] {
    for (size_t i = 0; i < x->grad.data.size(); ++i) x->grad.data[i] += out->grad.data[i];
  });
  return out;
}

NodePtr Graph::matmul(NodePtr a, NodePtr b) {
  expect(a->value.ndim() == 2 && b->value.ndim() == 2 && a->value.dim(1) == b->value.dim(0),
         "matmul: shape mismatch");
  const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
  auto out = make_node(Tensor::zeros({m, n}));
  const double* av = a->value.data.data();
  const double* bv = b->value.data.data();
  double* ov = out->value.data.data();
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double av_ik = av[static_cast<size_t>(i) * k + kk];
      if (av_ik == 0.0) continue;
      const double* br = bv + static_cast<size_t>(kk) * n;
      double* orow = ov + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av_ik * br[j];
    }
  record([a, b, out, m, k, n] {
    const double* go = out->grad.data.data();
    const double* av2 = a->value.data.data();
    const double* bv2 = b->value.data.data();
    double* ga = a->grad.data.data();
    double* gb = b->grad.data.data();
    // dA = dOut * B^T
    for (int i = 0; i < m; ++i)
      for (int kk = 0; kk < k; ++kk) {
        const double* grow = go + static_cast<size_t>(i) * n;
        const double* br = bv2 + static_cast<size_t>(kk) * n;
        double s = 0;
        for (int j = 0; j < n; ++j) s += grow[j] * br[j];
        ga[static_cast<size_t>(i) * k + kk] += s;
      }
    // dB = A^T * dOut
    for (int kk = 0; kk < k; ++kk)
      for (int i = 0; i < m; ++i) {
        const double av_ik = av2[static_cast<size_t>(i) * k + kk];
        if (av_ik == 0.0) continue;
        const double* grow = go + static_cast<size_t>(i) * n;
        double* gbr = gb + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) gbr[j] += av_ik * grow[j];
      }
  });
  return out;
}

NodePtr Graph::transpose2d(NodePtr a) {
  expect(a->value.ndim() == 2, "transpose2d: expects (m,n)");
  const int m = a->value.dim(0), n = a->value.dim(1);
  auto out = make_node(Tensor::zeros({n, m}));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out->value.data[static_cast<size_t>(j) * m + i] =
          a->value.data[static_cast<size_t>(i) * n + j];
  record([a, out, m, n] {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        a->grad.data[static_cast<size_t>(i) * n + j] +=
            out->grad.data[static_cast<size_t>(j) * m + i];
  });
  return out;
}

NodePtr Graph::softmax_rows(NodePtr a) {
  expect(a->value.ndim() == 2, "softmax_rows: expects (m,n)");
  const int m = a->value.dim(0), n = a->value.dim(1);
  auto out = make_node(Tensor::zeros({m, n}));
  for (int i = 0; i < m; ++i) {
    const double* row = a->value.data.data() + static_cast<size_t>(i) * n;
    double* orow = out->value.data.data() + static_cast<size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double denom = 0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= denom;
  }
  record([a, out, m, n] {
    for (int i = 0; i < m; ++i) {
      const double* y = out->value.data.data() + static_cast<size_t>(i) * n;
      const double* gy = out->grad.data.data() + static_cast<size_t>(i) * n;
      double* gx = a->grad.data.data() + static_cast<size_t>(i) * n;
      double dotp = 0;
      for (int j = 0; j < n; ++j) dotp += gy[j] * y[j];
      for (int j = 0; j < n; ++j) gx[j] += (gy[j] - dotp) * y[j];
    }
  });
  return out;
}

NodePtr Graph::mean_all(NodePtr x) {
  const size_t n = x->value.data.size();
  auto out = make_node(Tensor::zeros({1}));
  double s = 0;
  for (double v : x->value.data) s += v;
  out->value.data[0] = s / static_cast<double>(n);
  record([x, out, n] {
    const double g = out->grad.data[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) x->grad.data[i] += g;
  });
  return out;
}

NodePtr Graph::dot(NodePtr x, const Tensor& w) {
  expect(x->value.numel() == w.numel(), "dot: size mismatch");
  auto out = make_node(Tensor::zeros({1}));
  double s = 0;
  for (size_t i = 0; i < x->value.data.size(); ++i) s += x->value.data[i] * w.data[i];
  out->value.data[0] = s;
  auto wcopy = std::make_shared<Tensor>(w);
  record([x, out, wcopy] {
    const double g = out->grad.data[0];
    for (size_t i = 0; i < x->grad.data.size(); ++i) x->grad.data[i] += g * wcopy->data[i];
  });
  return out;
}

NodePtr Graph::bce_mean(NodePtr pred, const Tensor& target, double clamp_eps) {
  expect(pred->value.same_shape(target), "bce_mean: shape mismatch");
  const size_t n = pred->value.data.size();
  auto out = make_node(Tensor::zeros({1}));
  const double lo = clamp_eps, hi = 1.0 - clamp_eps;
  double s = 0;
  for (size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pred->value.data[i], lo, hi);
    const double t = target.data[i];
    s += -t * std::log(p) - (1.0 - t) * std::log(1.0 - p);
  }
  out->value.data[0] = s / static_cast<double>(n);
  auto tcopy = std::make_shared<Tensor>(target);
  record([pred, out, tcopy, n, lo, hi] {
    const double g = out->grad.data[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      const double raw = pred->value.data[i];
      if (raw <= lo || raw >= hi) continue;  // clamped region has zero slope
      const double t = tcopy->data[i];
      pred->grad.data[i] += g * (raw - t) / (raw * (1.0 - raw));
    }
  });
  return out;
}

}  // namespace lseg::nn
