// Copyright 2026 The resunet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "resunet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace resunet {

namespace {

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ShapeError(std::string(op) + ": expected NCHW tensor, got " + to_string(s));
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

// Output rows [lo, hi) whose tap lands inside [0, extent) for a given offset.
struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

Range valid_outputs(std::ptrdiff_t offset, std::size_t extent, std::size_t out_extent, std::size_t stride) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto n = static_cast<std::ptrdiff_t>(extent);
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
  std::ptrdiff_t last = n - 1 - offset;
  if (last < 0) return {};
  std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_extent), last / s + 1);
  if (hi <= lo) return {};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, k, ho, wo;
  std::size_t stride, dilation;
  std::ptrdiff_t pad_top, pad_left;

  std::ptrdiff_t row_offset(std::size_t ky) const {
    return static_cast<std::ptrdiff_t>(ky * dilation) - pad_top;
  }
  std::ptrdiff_t col_offset(std::size_t kx) const {
    return static_cast<std::ptrdiff_t>(kx * dilation) - pad_left;
  }
};

std::ptrdiff_t same_pad_before(std::size_t extent, std::size_t out, std::size_t k, std::size_t stride,
                               std::size_t dilation) {
  const std::ptrdiff_t needed = static_cast<std::ptrdiff_t>((out - 1) * stride + (k - 1) * dilation + 1) -
                                static_cast<std::ptrdiff_t>(extent);
  return std::max<std::ptrdiff_t>(needed, 0) / 2;
}

}  // namespace

std::size_t same_output_extent(std::size_t extent, int stride) {
  const auto s = static_cast<std::size_t>(stride);
  return (extent + s - 1) / s;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int dilation) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require_rank4(xs, "conv2d");
  if (ws.size() != 4 || ws[2] != ws[3] || ws[2] < 1)
    throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " + to_string(ws));
  if (ws[1] != xs[1])
    throw ShapeError("conv2d: input channels of x " + to_string(xs) + " do not match weight " + to_string(ws));
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
  if (dilation < 1) throw ShapeError("conv2d: dilation must be >= 1, got " + std::to_string(dilation));
  if (bias.defined() && bias.shape() != Shape{ws[0]})
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " does not match weight " + to_string(ws));

  ConvGeometry g{};
  g.n = xs[0];
  g.cin = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.cout = ws[0];
  g.k = ws[2];
  g.stride = static_cast<std::size_t>(stride);
  g.dilation = static_cast<std::size_t>(dilation);
  g.ho = same_output_extent(g.h, stride);
  g.wo = same_output_extent(g.w, stride);
  g.pad_top = same_pad_before(g.h, g.ho, g.k, g.stride, g.dilation);
  g.pad_left = same_pad_before(g.w, g.wo, g.k, g.stride, g.dilation);

  Tensor<T> out(Shape{g.n, g.cout, g.ho, g.wo});
  const T* xd = x.value().data();
  const T* wd = weight.value().data();
  T* od = out.data();
  const std::size_t in_plane = g.h * g.w;
  const std::size_t out_plane = g.ho * g.wo;

  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.cout; ++co) {
      T* op = od + (n * g.cout + co) * out_plane;
      if (bias.defined()) std::fill(op, op + out_plane, bias.value()[co]);
      for (std::size_t ci = 0; ci < g.cin; ++ci) {
        const T* ip = xd + (n * g.cin + ci) * in_plane;
        const T* wp = wd + (co * g.cin + ci) * g.k * g.k;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const auto dy = g.row_offset(ky);
          const Range rows = valid_outputs(dy, g.h, g.ho, g.stride);
          if (rows.lo >= rows.hi) continue;
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const auto dx = g.col_offset(kx);
            const Range cols = valid_outputs(dx, g.w, g.wo, g.stride);
            if (cols.lo >= cols.hi) continue;
            const T wv = wp[ky * g.k + kx];
            for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
              const std::size_t iy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oy * g.stride) + dy);
              T* orow = op + oy * g.wo;
              const T* irow = ip + iy * g.w;
              if (g.stride == 1) {
                const T* src = irow + dx;
                for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) orow[ox] += wv * src[ox];
              } else {
                for (std::size_t ox = cols.lo; ox < cols.hi; ++ox)
                  orow[ox] += wv * irow[static_cast<std::ptrdiff_t>(ox * g.stride) + dx];
              }
            }
          }
        }
      }
    }
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result<T>(std::move(out), std::move(inputs), [g, has_bias](Node<T>& self) {
    const T* gy = self.grad.data();
    Node<T>& xn = *self.inputs[0];
    Node<T>& wn = *self.inputs[1];
    const std::size_t in_plane = g.h * g.w;
    const std::size_t out_plane = g.ho * g.wo;
    const T* xd = xn.value.data();
    const T* wd = wn.value.data();
    T* gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
    T* gw = wn.requires_grad ? wn.grad_buffer().data() : nullptr;

    if (has_bias && self.inputs[2]->requires_grad) {
      T* gb = self.inputs[2]->grad_buffer().data();
      for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t co = 0; co < g.cout; ++co) {
          const T* gp = gy + (n * g.cout + co) * out_plane;
          T acc = 0;
          for (std::size_t i = 0; i < out_plane; ++i) acc += gp[i];
          gb[co] += acc;
        }
    }

    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        const T* gp = gy + (n * g.cout + co) * out_plane;
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const T* ip = xd + (n * g.cin + ci) * in_plane;
          T* gip = gx ? gx + (n * g.cin + ci) * in_plane : nullptr;
          const std::size_t wbase = (co * g.cin + ci) * g.k * g.k;
          for (std::size_t ky = 0; ky < g.k; ++ky) {
            const auto dy = g.row_offset(ky);
            const Range rows = valid_outputs(dy, g.h, g.ho, g.stride);
            if (rows.lo >= rows.hi) continue;
            for (std::size_t kx = 0; kx < g.k; ++kx) {
              const auto dx = g.col_offset(kx);
              const Range cols = valid_outputs(dx, g.w, g.wo, g.stride);
              if (cols.lo >= cols.hi) continue;
              const T wv = wd[wbase + ky * g.k + kx];
              T wacc = 0;
              for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
                const std::size_t iy = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(oy * g.stride) + dy);
                const T* grow = gp + oy * g.wo;
                const T* irow = ip + iy * g.w;
                if (g.stride == 1) {
                  const T* src = irow + dx;
                  for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) wacc += grow[ox] * src[ox];
                  if (gip) {
                    T* dst = gip + iy * g.w + dx;
                    for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox] += wv * grow[ox];
                  }
                } else {
                  for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride) + dx;
                    wacc += grow[ox] * irow[ix];
                    if (gip) gip[iy * g.w + static_cast<std::size_t>(ix)] += wv * grow[ox];
                  }
                }
              }
              if (gw) gw[wbase + ky * g.k + kx] += wacc;
            }
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>& stats, Mode mode,
                  double momentum, double epsilon) {
  const Shape& xs = x.shape();
  require_rank4(xs, "batch_norm");
  const std::size_t n = xs[0], c = xs[1], plane = xs[2] * xs[3];
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
    throw ShapeError("batch_norm: gamma/beta " + to_string(gamma.shape()) + " do not match input " + to_string(xs));
  if (stats.running_mean.shape() != Shape{c})
    throw ShapeError("batch_norm: running stats " + to_string(stats.running_mean.shape()) +
                     " do not match input " + to_string(xs));
  const std::size_t population = n * plane;
  if (mode == Mode::Train && population < 2)
    throw ShapeError("batch_norm: train mode needs at least 2 values per channel, got input " + to_string(xs));

  Tensor<T> out(xs);
  Tensor<T> xhat(xs);
  std::vector<T> inv_std(c);
  const T* xd = x.value().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (mode == Mode::Train) {
      double s = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xd + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      mu = s / static_cast<double>(population);
      double ss = 0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xd + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(population);
      stats.running_mean[ch] = static_cast<T>(momentum * stats.running_mean[ch] + (1.0 - momentum) * mu);
      stats.running_var[ch] = static_cast<T>(momentum * stats.running_var[ch] + (1.0 - momentum) * var);
    } else {
      mu = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const double istd = 1.0 / std::sqrt(var + epsilon);
    inv_std[ch] = static_cast<T>(istd);
    const T g = gamma.value()[ch], bt = beta.value()[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = static_cast<T>((xd[off + i] - mu) * istd);
        xhat[off + i] = h;
        out[off + i] = g * h + bt;
      }
    }
  }

  const bool train = mode == Mode::Train;
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, plane, train](Node<T>& self) {
                          const T* gy = self.grad.data();
                          Node<T>& xn = *self.inputs[0];
                          Node<T>& gn = *self.inputs[1];
                          Node<T>& bn = *self.inputs[2];
                          const double m = static_cast<double>(n * plane);
                          for (std::size_t ch = 0; ch < c; ++ch) {
                            double sum_dy = 0, sum_dy_xhat = 0;
                            for (std::size_t b = 0; b < n; ++b) {
                              const std::size_t off = (b * c + ch) * plane;
                              for (std::size_t i = 0; i < plane; ++i) {
                                sum_dy += gy[off + i];
                                sum_dy_xhat += static_cast<double>(gy[off + i]) * xhat[off + i];
                              }
                            }
                            if (gn.requires_grad) gn.grad_buffer()[ch] += static_cast<T>(sum_dy_xhat);
                            if (bn.requires_grad) bn.grad_buffer()[ch] += static_cast<T>(sum_dy);
                            if (!xn.requires_grad) continue;
                            T* gx = xn.grad_buffer().data();
                            const double g = gn.value[ch];
                            const double istd = inv_std[ch];
                            for (std::size_t b = 0; b < n; ++b) {
                              const std::size_t off = (b * c + ch) * plane;
                              for (std::size_t i = 0; i < plane; ++i) {
                                if (train) {
                                  const double v = g * istd / m * (m * gy[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat);
                                  gx[off + i] += static_cast<T>(v);
                                } else {
                                  gx[off + i] += static_cast<T>(g * istd * gy[off + i]);
                                }
                              }
                            }
                          }
                        });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T{0} ? xd[i] : T{0};
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& xn = *self.inputs[0];
    T* gx = xn.grad_buffer().data();
    const T* xd = xn.value.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xd[i] > T{0}) gx[i] += self.grad[i];
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const T* xd = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xd[i];
    if (v >= 0) {
      out[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T{1} + e);
    }
  }
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    T* gx = self.inputs[0]->grad_buffer().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.value[i];
      gx[i] += self.grad[i] * y * (T{1} - y);
    }
  });
}

template <typename T>
Var<T> softmax_channel(const Var<T>& x) {
  const Shape& xs = x.shape();
  require_rank4(xs, "softmax_channel");
  const std::size_t n = xs[0], c = xs[1], plane = xs[2] * xs[3];
  Tensor<T> out(xs);
  const T* xd = x.value().data();
  std::vector<T> buf(c);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t base = b * c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < c; ++k) mx = std::max(mx, xd[base + k * plane + i]);
      T total = 0;
      for (std::size_t k = 0; k < c; ++k) {
        buf[k] = std::exp(xd[base + k * plane + i] - mx);
        total += buf[k];
      }
      for (std::size_t k = 0; k < c; ++k) out[base + k * plane + i] = buf[k] / total;
    }
  }
  return make_result<T>(std::move(out), {x}, [n, c, plane](Node<T>& self) {
    T* gx = self.inputs[0]->grad_buffer().data();
    const T* y = self.value.data();
    const T* gy = self.grad.data();
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = b * c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        T dot = 0;
        for (std::size_t k = 0; k < c; ++k) dot += gy[base + k * plane + i] * y[base + k * plane + i];
        for (std::size_t k = 0; k < c; ++k) {
          const std::size_t j = base + k * plane + i;
          gx[j] += y[j] * (gy[j] - dot);
        }
      }
    }
  });
}

template <typename T>
Var<T> max_pool_grid(const Var<T>& x, std::size_t cells) {
  const Shape& xs = x.shape();
  require_rank4(xs, "max_pool_grid");
  if (cells < 1) throw ShapeError("max_pool_grid: cells must be positive");
  const std::size_t h = xs[2], w = xs[3];
  if (h % cells != 0 || w % cells != 0)
    throw ShapeError("max_pool_grid: spatial extents of " + to_string(xs) + " must be divisible by cells=" +
                     std::to_string(cells));
  const std::size_t ch = h / cells, cw = w / cells;
  const std::size_t planes = xs[0] * xs[1];
  Tensor<T> out(xs);
  std::vector<std::size_t> argmax(planes * cells * cells);
  const T* xd = x.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* ip = xd + p * h * w;
    T* op = out.data() + p * h * w;
    for (std::size_t cy = 0; cy < cells; ++cy)
      for (std::size_t cx = 0; cx < cells; ++cx) {
        std::size_t best = cy * ch * w + cx * cw;
        for (std::size_t y = cy * ch; y < (cy + 1) * ch; ++y)
          for (std::size_t xx = cx * cw; xx < (cx + 1) * cw; ++xx)
            if (ip[y * w + xx] > ip[best]) best = y * w + xx;
        argmax[(p * cells + cy) * cells + cx] = best;
        const T v = ip[best];
        for (std::size_t y = cy * ch; y < (cy + 1) * ch; ++y)
          for (std::size_t xx = cx * cw; xx < (cx + 1) * cw; ++xx) op[y * w + xx] = v;
      }
  }
  return make_result<T>(std::move(out), {x}, [argmax = std::move(argmax), planes, cells, ch, cw, h, w](Node<T>& self) {
    T* gx = self.inputs[0]->grad_buffer().data();
    const T* gy = self.grad.data();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t cy = 0; cy < cells; ++cy)
        for (std::size_t cx = 0; cx < cells; ++cx) {
          T acc = 0;
          for (std::size_t y = cy * ch; y < (cy + 1) * ch; ++y)
            for (std::size_t xx = cx * cw; xx < (cx + 1) * cw; ++xx) acc += gy[p * h * w + y * w + xx];
          gx[p * h * w + argmax[(p * cells + cy) * cells + cx]] += acc;
        }
  });
}

template <typename T>
Var<T> nearest_upsample(const Var<T>& x, std::size_t factor) {
  const Shape& xs = x.shape();
  require_rank4(xs, "nearest_upsample");
  if (factor < 2) throw ShapeError("nearest_upsample: factor must be >= 2, got " + std::to_string(factor));
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t ho = h * factor, wo = w * factor;
  Tensor<T> out(Shape{xs[0], xs[1], ho, wo});
  const T* xd = x.value().data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < ho; ++y) {
      const T* irow = xd + p * h * w + (y / factor) * w;
      T* orow = out.data() + p * ho * wo + y * wo;
      for (std::size_t xx = 0; xx < wo; ++xx) orow[xx] = irow[xx / factor];
    }
  return make_result<T>(std::move(out), {x}, [planes, h, w, factor](Node<T>& self) {
    T* gx = self.inputs[0]->grad_buffer().data();
    const std::size_t ho = h * factor, wo = w * factor;
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < ho; ++y) {
        const T* grow = self.grad.data() + p * ho * wo + y * wo;
        T* dst = gx + p * h * w + (y / factor) * w;
        for (std::size_t xx = 0; xx < wo; ++xx) dst[xx / factor] += grow[xx];
      }
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = xs.front().shape();
  require_rank4(first, "concat_channels");
  std::size_t total_c = 0;
  std::vector<std::size_t> chans;
  for (const auto& v : xs) {
    const Shape& s = v.shape();
    require_rank4(s, "concat_channels");
    if (s[0] != first[0] || s[2] != first[2] || s[3] != first[3])
      throw ShapeError("concat_channels: N/H/W mismatch " + to_string(first) + " vs " + to_string(s));
    chans.push_back(s[1]);
    total_c += s[1];
  }
  const std::size_t n = first[0], plane = first[2] * first[3];
  Tensor<T> out(Shape{n, total_c, first[2], first[3]});
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t c0 = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const T* src = xs[i].value().data() + b * chans[i] * plane;
      std::copy(src, src + chans[i] * plane, out.data() + (b * total_c + c0) * plane);
      c0 += chans[i];
    }
  }
  return make_result<T>(std::move(out), xs, [chans, n, plane, total_c](Node<T>& self) {
    for (std::size_t b = 0; b < n; ++b) {
      std::size_t c0 = 0;
      for (std::size_t i = 0; i < chans.size(); ++i) {
        Node<T>& in = *self.inputs[i];
        if (in.requires_grad) {
          T* dst = in.grad_buffer().data() + b * chans[i] * plane;
          const T* src = self.grad.data() + (b * total_c + c0) * plane;
          for (std::size_t j = 0; j < chans[i] * plane; ++j) dst[j] += src[j];
        }
        c0 += chans[i];
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, std::size_t start, std::size_t count) {
  const Shape& xs = x.shape();
  require_rank4(xs, "slice_channels");
  if (count == 0 || start + count > xs[1])
    throw ShapeError("slice_channels: range [" + std::to_string(start) + "," + std::to_string(start + count) +
                     ") outside channels of " + to_string(xs));
  const std::size_t n = xs[0], c = xs[1], plane = xs[2] * xs[3];
  Tensor<T> out(Shape{n, count, xs[2], xs[3]});
  for (std::size_t b = 0; b < n; ++b) {
    const T* src = x.value().data() + (b * c + start) * plane;
    std::copy(src, src + count * plane, out.data() + b * count * plane);
  }
  return make_result<T>(std::move(out), {x}, [n, c, start, count, plane](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t b = 0; b < n; ++b) {
      T* dst = g + (b * c + start) * plane;
      const T* src = self.grad.data() + b * count * plane;
      for (std::size_t j = 0; j < count * plane; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      T* g = in->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (self.inputs[0]->requires_grad) {
      T* g = self.inputs[0]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (self.inputs[1]->requires_grad) {
      T* g = self.inputs[1]->grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& an = *self.inputs[0];
    Node<T>& bn = *self.inputs[1];
    if (an.requires_grad) {
      T* g = an.grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      T* g = bn.grad_buffer().data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "div");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& an = *self.inputs[0];
    Node<T>& bn = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T inv = T{1} / bn.value[i];
      if (an.requires_grad) an.grad_buffer()[i] += self.grad[i] * inv;
      if (bn.requires_grad) bn.grad_buffer()[i] -= self.grad[i] * self.value[i] * inv;
    }
  });
}

template <typename T>
Var<T> affine(const Var<T>& x, double scale, double shift) {
  Tensor<T> out(x.shape());
  const T s = static_cast<T>(scale), t = static_cast<T>(shift);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * x.value()[i] + t;
  return make_result<T>(std::move(out), {x}, [s](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s * self.grad[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (T v : x.value().values()) acc += v;
  return make_result<T>(Tensor<T>(Shape{1}, std::vector<T>{acc}), {x}, [](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return affine(sum(x), 1.0 / static_cast<double>(x.value().size()), 0.0);
}

template <typename T>
Var<T> spatial_sum(const Var<T>& x) {
  const Shape& xs = x.shape();
  require_rank4(xs, "spatial_sum");
  const std::size_t planes = xs[0] * xs[1], plane = xs[2] * xs[3];
  Tensor<T> out(Shape{xs[0], xs[1]});
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = 0;
    const T* src = x.value().data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += src[i];
    out[p] = acc;
  }
  return make_result<T>(std::move(out), {x}, [planes, plane](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < plane; ++i) g[p * plane + i] += self.grad[p];
  });
}

template <typename T>
Var<T> weighted_row_sum(const Var<T>& x, const Tensor<T>& weights) {
  const Shape& xs = x.shape();
  if (xs.size() != 2) throw ShapeError("weighted_row_sum: expected [N,C], got " + to_string(xs));
  require_same(xs, weights.shape(), "weighted_row_sum");
  const std::size_t n = xs[0], c = xs[1];
  Tensor<T> out(Shape{n});
  for (std::size_t b = 0; b < n; ++b) {
    T acc = 0;
    for (std::size_t k = 0; k < c; ++k) acc += weights[b * c + k] * x.value()[b * c + k];
    out[b] = acc;
  }
  return make_result<T>(std::move(out), {x}, [weights, n, c](Node<T>& self) {
    T* g = self.inputs[0]->grad_buffer().data();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t k = 0; k < c; ++k) g[b * c + k] += weights[b * c + k] * self.grad[b];
  });
}

#define RESUNET_INSTANTIATE_OPS(T)                                                                            \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                              \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormStats<T>&, Mode, double,   \
                             double);                                                                         \
  template Var<T> relu(const Var<T>&);                                                                        \
  template Var<T> sigmoid(const Var<T>&);                                                                     \
  template Var<T> softmax_channel(const Var<T>&);                                                             \
  template Var<T> max_pool_grid(const Var<T>&, std::size_t);                                                  \
  template Var<T> nearest_upsample(const Var<T>&, std::size_t);                                               \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                                \
  template Var<T> slice_channels(const Var<T>&, std::size_t, std::size_t);                                    \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> div(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> affine(const Var<T>&, double, double);                                                      \
  template Var<T> sum(const Var<T>&);                                                                         \
  template Var<T> mean(const Var<T>&);                                                                        \
  template Var<T> spatial_sum(const Var<T>&);                                                                 \
  template Var<T> weighted_row_sum(const Var<T>&, const Tensor<T>&);

RESUNET_INSTANTIATE_OPS(float)
RESUNET_INSTANTIATE_OPS(double)

}  // namespace resunet
