// Copyright 2026 The firm-planar Authors
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

#ifndef FIRM_AUTODIFF_HPP_
#define FIRM_AUTODIFF_HPP_

#include <algorithm>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "firm/tensor.hpp"

namespace firm {

// Reverse-mode tape. One tape per forward pass; ops append nodes and record
// their backward closures. Parameter gradients accumulate across tapes until
// an explicit zero_grad.
class Tape {
 public:
  using Id = int;

  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void(Tape&, Id)> back;  // empty for constant leaves
  };

  const Tensor& val(Id id) const { return nodes_[static_cast<size_t>(id)].val; }
  Tensor& grad(Id id) { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

  // ----- leaves -----

  Id input(Tensor t) { return push(std::move(t), nullptr); }

  Id param(Parameter& p) {
    return push(Tensor(p.value), [&p](Tape& tape, Id id) {
      p.grad.add_(tape.grad(id));
    });
  }

  // ----- elementwise / broadcast -----

  // b broadcasts if it is a scalar or its shape is a suffix of a's shape.
  Id add(Id a, Id b) { return binary(a, b, +1.0); }
  Id sub(Id a, Id b) { return binary(a, b, -1.0); }

  Id mul(Id a, Id b) {
    check_broadcast(a, b, "mul");
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    Tensor out(ta.shape);
    int64_t bn = tb.numel();
    for (int64_t i = 0; i < ta.numel(); ++i)
      out.data[i] = ta.data[i] * tb.data[i % bn];
    return push(std::move(out), [a, b, bn](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& ta = t.val(a);
      const Tensor& tb = t.val(b);
      Tensor& ga = t.grad(a);
      Tensor& gb = t.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i) {
        ga.data[i] += g.data[i] * tb.data[i % bn];
        gb.data[i % bn] += g.data[i] * ta.data[i];
      }
    });
  }

  Id scale(Id a, double c) { return affine(a, c, 0.0); }
  Id neg(Id a) { return affine(a, -1.0, 0.0); }

  // c*x + d elementwise.
  Id affine(Id a, double c, double d) {
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = c * val(a).data[i] + d;
    return push(std::move(out), [a, c](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += c * g.data[i];
    });
  }

  Id relu(Id a) {
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i)
      out.data[i] = val(a).data[i] > 0.0 ? val(a).data[i] : 0.0;
    return push(std::move(out), [a](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& x = t.val(a);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i)
        if (x.data[i] > 0.0) ga.data[i] += g.data[i];
    });
  }

  Id silu(Id a) {
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
      double x = val(a).data[i];
      out.data[i] = x / (1.0 + std::exp(-x));
    }
    return push(std::move(out), [a](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& x = t.val(a);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x.data[i]));
        ga.data[i] += g.data[i] * s * (1.0 + x.data[i] * (1.0 - s));
      }
    });
  }

  Id tanh_act(Id a) {
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = std::tanh(val(a).data[i]);
    return push(std::move(out), [a](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& y = t.val(id);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i)
        ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    });
  }

  Id exp_op(Id a) {
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = std::exp(val(a).data[i]);
    return push(std::move(out), [a](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& y = t.val(id);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * y.data[i];
    });
  }

  Id clamp(Id a, double lo, double hi) {
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i)
      out.data[i] = clampd(val(a).data[i], lo, hi);
    return push(std::move(out), [a, lo, hi](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& x = t.val(a);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i)
        if (x.data[i] > lo && x.data[i] < hi) ga.data[i] += g.data[i];
    });
  }

  // Elementwise min; ties route gradient to a (deterministic).
  Id minimum(Id a, Id b) {
    if (!val(a).same_shape(val(b))) throw DimensionError("minimum: shape mismatch");
    Tensor out(val(a).shape);
    for (int64_t i = 0; i < out.numel(); ++i)
      out.data[i] = std::min(val(a).data[i], val(b).data[i]);
    return push(std::move(out), [a, b](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& xa = t.val(a);
      const Tensor& xb = t.val(b);
      Tensor& ga = t.grad(a);
      Tensor& gb = t.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i) {
        if (xa.data[i] <= xb.data[i])
          ga.data[i] += g.data[i];
        else
          gb.data[i] += g.data[i];
      }
    });
  }

  // ----- matrix products -----

  // a viewed as [R, k] (leading dims flattened) times w [k, n].
  Id matmul(Id a, Id w) {
    const Tensor& ta = val(a);
    const Tensor& tw = val(w);
    if (tw.ndim() != 2)
      throw DimensionError("matmul: weight must be 2-d, got " + shape_str(tw.shape));
    int k = tw.shape[0], n = tw.shape[1];
    if (ta.ndim() < 1 || ta.dim(-1) != k)
      throw DimensionError("matmul: input last dim " + std::to_string(ta.dim(-1)) +
                           " != weight rows " + std::to_string(k));
    int64_t rows = ta.rows_as_matrix();
    std::vector<int> out_shape(ta.shape.begin(), ta.shape.end() - 1);
    out_shape.push_back(n);
    Tensor out(out_shape);
    mm(ta.data.data(), tw.data.data(), out.data.data(), rows, k, n);
    return push(std::move(out), [a, w, rows, k, n](Tape& t, Id id) {
      const double* g = t.grad(id).data.data();
      const double* pa = t.val(a).data.data();
      const double* pw = t.val(w).data.data();
      double* ga = t.grad(a).data.data();
      double* gw = t.grad(w).data.data();
      // dA[r,l] += sum_j g[r,j] * W[l,j]
      for (int64_t r = 0; r < rows; ++r)
        for (int l = 0; l < k; ++l) {
          double acc = 0.0;
          const double* grow = g + r * n;
          const double* wrow = pw + static_cast<int64_t>(l) * n;
          for (int j = 0; j < n; ++j) acc += grow[j] * wrow[j];
          ga[r * k + l] += acc;
        }
      // dW[l,j] += sum_r A[r,l] * g[r,j]
      for (int64_t r = 0; r < rows; ++r) {
        const double* arow = pa + r * k;
        const double* grow = g + r * n;
        for (int l = 0; l < k; ++l) {
          double av = arow[l];
          if (av == 0.0) continue;
          double* gwrow = gw + static_cast<int64_t>(l) * n;
          for (int j = 0; j < n; ++j) gwrow[j] += av * grow[j];
        }
      }
    });
  }

  // Batched a[B,m,k] x b[B,k,n] -> [B,m,n].
  Id bmm(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.ndim() != 3 || tb.ndim() != 3 || ta.shape[0] != tb.shape[0] ||
        ta.shape[2] != tb.shape[1])
      throw DimensionError("bmm: incompatible shapes " + shape_str(ta.shape) +
                           " x " + shape_str(tb.shape));
    int B = ta.shape[0], m = ta.shape[1], k = ta.shape[2], n = tb.shape[2];
    Tensor out({B, m, n});
    for (int bi = 0; bi < B; ++bi)
      mm(ta.data.data() + static_cast<int64_t>(bi) * m * k,
         tb.data.data() + static_cast<int64_t>(bi) * k * n,
         out.data.data() + static_cast<int64_t>(bi) * m * n, m, k, n);
    return push(std::move(out), [a, b, B, m, k, n](Tape& t, Id id) {
      for (int bi = 0; bi < B; ++bi) {
        const double* g = t.grad(id).data.data() + static_cast<int64_t>(bi) * m * n;
        const double* pa = t.val(a).data.data() + static_cast<int64_t>(bi) * m * k;
        const double* pb = t.val(b).data.data() + static_cast<int64_t>(bi) * k * n;
        double* ga = t.grad(a).data.data() + static_cast<int64_t>(bi) * m * k;
        double* gb = t.grad(b).data.data() + static_cast<int64_t>(bi) * k * n;
        for (int r = 0; r < m; ++r)
          for (int l = 0; l < k; ++l) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += g[r * n + j] * pb[l * n + j];
            ga[r * k + l] += acc;
          }
        for (int r = 0; r < m; ++r)
          for (int l = 0; l < k; ++l) {
            double av = pa[r * k + l];
            for (int j = 0; j < n; ++j) gb[l * n + j] += av * g[r * n + j];
          }
      }
    });
  }

  // Batched a[B,m,k] x b[B,n,k]^T -> [B,m,n].
  Id bmm_nt(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.ndim() != 3 || tb.ndim() != 3 || ta.shape[0] != tb.shape[0] ||
        ta.shape[2] != tb.shape[2])
      throw DimensionError("bmm_nt: incompatible shapes " + shape_str(ta.shape) +
                           " x " + shape_str(tb.shape));
    int B = ta.shape[0], m = ta.shape[1], k = ta.shape[2], n = tb.shape[1];
    Tensor out({B, m, n});
    for (int bi = 0; bi < B; ++bi) {
      const double* pa = ta.data.data() + static_cast<int64_t>(bi) * m * k;
      const double* pb = tb.data.data() + static_cast<int64_t>(bi) * n * k;
      double* po = out.data.data() + static_cast<int64_t>(bi) * m * n;
      for (int r = 0; r < m; ++r)
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int l = 0; l < k; ++l) acc += pa[r * k + l] * pb[j * k + l];
          po[r * n + j] = acc;
        }
    }
    return push(std::move(out), [a, b, B, m, k, n](Tape& t, Id id) {
      for (int bi = 0; bi < B; ++bi) {
        const double* g = t.grad(id).data.data() + static_cast<int64_t>(bi) * m * n;
        const double* pa = t.val(a).data.data() + static_cast<int64_t>(bi) * m * k;
        const double* pb = t.val(b).data.data() + static_cast<int64_t>(bi) * n * k;
        double* ga = t.grad(a).data.data() + static_cast<int64_t>(bi) * m * k;
        double* gb = t.grad(b).data.data() + static_cast<int64_t>(bi) * n * k;
        // dA[r,l] += sum_j g[r,j] * B[j,l]; dB[j,l] += sum_r g[r,j] * A[r,l]
        for (int r = 0; r < m; ++r)
          for (int j = 0; j < n; ++j) {
            double gv = g[r * n + j];
            if (gv == 0.0) continue;
            for (int l = 0; l < k; ++l) {
              ga[r * k + l] += gv * pb[j * k + l];
              gb[j * k + l] += gv * pa[r * k + l];
            }
          }
      }
    });
  }

  // ----- shape ops -----

  Id reshape(Id a, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != val(a).numel())
      throw DimensionError("reshape: element count mismatch");
    Tensor out(std::move(shape), val(a).data);
    return push(std::move(out), [a](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    });
  }

  // [B,T,d] -> [B*h,T,d/h]
  Id split_heads(Id a, int heads) {
    const Tensor& x = val(a);
    if (x.ndim() != 3) throw DimensionError("split_heads: expect 3-d input");
    int B = x.shape[0], T = x.shape[1], d = x.shape[2];
    if (d % heads != 0)
      throw ConfigError("attention dim " + std::to_string(d) +
                        " not divisible by heads " + std::to_string(heads));
    int dh = d / heads;
    Tensor out({B * heads, T, dh});
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int h = 0; h < heads; ++h)
          for (int j = 0; j < dh; ++j)
            out.data[(((static_cast<int64_t>(b) * heads + h) * T) + t) * dh + j] =
                x.data[(static_cast<int64_t>(b) * T + t) * d + h * dh + j];
    return push(std::move(out), [a, B, T, heads, dh](Tape& t_, Id id) {
      const Tensor& g = t_.grad(id);
      Tensor& ga = t_.grad(a);
      int d = heads * dh;
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t)
          for (int h = 0; h < heads; ++h)
            for (int j = 0; j < dh; ++j)
              ga.data[(static_cast<int64_t>(b) * T + t) * d + h * dh + j] +=
                  g.data[(((static_cast<int64_t>(b) * heads + h) * T) + t) * dh + j];
    });
  }

  // [B*h,T,dh] -> [B,T,h*dh]
  Id merge_heads(Id a, int heads) {
    const Tensor& x = val(a);
    if (x.ndim() != 3 || x.shape[0] % heads != 0)
      throw DimensionError("merge_heads: bad input shape");
    int B = x.shape[0] / heads, T = x.shape[1], dh = x.shape[2];
    int d = heads * dh;
    Tensor out({B, T, d});
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int h = 0; h < heads; ++h)
          for (int j = 0; j < dh; ++j)
            out.data[(static_cast<int64_t>(b) * T + t) * d + h * dh + j] =
                x.data[(((static_cast<int64_t>(b) * heads + h) * T) + t) * dh + j];
    return push(std::move(out), [a, B, T, heads, dh](Tape& t_, Id id) {
      const Tensor& g = t_.grad(id);
      Tensor& ga = t_.grad(a);
      int d = heads * dh;
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t)
          for (int h = 0; h < heads; ++h)
            for (int j = 0; j < dh; ++j)
              ga.data[(((static_cast<int64_t>(b) * heads + h) * T) + t) * dh + j] +=
                  g.data[(static_cast<int64_t>(b) * T + t) * d + h * dh + j];
    });
  }

  // Concatenate [B,Ti,d] blocks along the time axis.
  Id concat_time(const std::vector<Id>& parts) {
    if (parts.empty()) throw DimensionError("concat_time: empty list");
    int B = val(parts[0]).shape[0], d = val(parts[0]).shape[2];
    int T = 0;
    for (Id p : parts) {
      const Tensor& x = val(p);
      if (x.ndim() != 3 || x.shape[0] != B || x.shape[2] != d)
        throw DimensionError("concat_time: incompatible block " + shape_str(x.shape));
      T += x.shape[1];
    }
    Tensor out({B, T, d});
    int off = 0;
    for (Id p : parts) {
      const Tensor& x = val(p);
      int Ti = x.shape[1];
      for (int b = 0; b < B; ++b)
        std::memcpy(out.data.data() + ((static_cast<int64_t>(b) * T) + off) * d,
                    x.data.data() + static_cast<int64_t>(b) * Ti * d,
                    static_cast<size_t>(Ti) * d * sizeof(double));
      off += Ti;
    }
    std::vector<Id> ps = parts;
    return push(std::move(out), [ps, B, T, d](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      int off = 0;
      for (Id p : ps) {
        Tensor& gp = t.grad(p);
        int Ti = t.val(p).shape[1];
        for (int b = 0; b < B; ++b)
          for (int i = 0; i < Ti * d; ++i)
            gp.data[static_cast<int64_t>(b) * Ti * d + i] +=
                g.data[((static_cast<int64_t>(b) * T) + off) * d + i];
        off += Ti;
      }
    });
  }

  // [B,T,d] -> [B,len,d] starting at time index start.
  Id slice_time(Id a, int start, int len) {
    const Tensor& x = val(a);
    if (x.ndim() != 3 || start < 0 || start + len > x.shape[1])
      throw DimensionError("slice_time: out of range");
    int B = x.shape[0], T = x.shape[1], d = x.shape[2];
    Tensor out({B, len, d});
    for (int b = 0; b < B; ++b)
      std::memcpy(out.data.data() + static_cast<int64_t>(b) * len * d,
                  x.data.data() + ((static_cast<int64_t>(b) * T) + start) * d,
                  static_cast<size_t>(len) * d * sizeof(double));
    return push(std::move(out), [a, start, len, B, T, d](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad(a);
      for (int b = 0; b < B; ++b)
        for (int i = 0; i < len * d; ++i)
          ga.data[((static_cast<int64_t>(b) * T) + start) * d + i] +=
              g.data[static_cast<int64_t>(b) * len * d + i];
    });
  }

  // ----- normalization / softmax -----

  // Softmax over the last dim with an optional additive mask (broadcast over
  // leading dims; mask numel must divide input numel).
  Id softmax_lastdim(Id a, const Tensor* mask = nullptr) {
    const Tensor& x = val(a);
    int n = x.dim(-1);
    int64_t rows = x.rows_as_matrix();
    Tensor out(x.shape);
    int64_t mn = mask ? mask->numel() : 0;
    if (mask && x.numel() % mn != 0)
      throw DimensionError("softmax mask does not broadcast");
    for (int64_t r = 0; r < rows; ++r) {
      const double* xr = x.data.data() + r * n;
      double* yr = out.data.data() + r * n;
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double v = xr[j] + (mask ? mask->data[(r * n + j) % mn] : 0.0);
        yr[j] = v;
        mx = std::max(mx, v);
      }
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        yr[j] = std::exp(yr[j] - mx);
        sum += yr[j];
      }
      for (int j = 0; j < n; ++j) yr[j] /= sum;
    }
    return push(std::move(out), [a, rows, n](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& y = t.val(id);
      Tensor& ga = t.grad(a);
      for (int64_t r = 0; r < rows; ++r) {
        const double* gr = g.data.data() + r * n;
        const double* yr = y.data.data() + r * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += gr[j] * yr[j];
        for (int j = 0; j < n; ++j) ga.data[r * n + j] += yr[j] * (gr[j] - dot);
      }
    });
  }

  // Layer norm over the last dim with affine parameters gamma, beta [n].
  Id layer_norm(Id a, Id gamma, Id beta, double eps = 1e-5) {
    const Tensor& x = val(a);
    int n = x.dim(-1);
    if (val(gamma).numel() != n || val(beta).numel() != n)
      throw DimensionError("layer_norm: affine params must have last-dim size");
    int64_t rows = x.rows_as_matrix();
    Tensor out(x.shape);
    Tensor xhat(x.shape);
    Tensor inv_std({static_cast<int>(rows)});
    for (int64_t r = 0; r < rows; ++r) {
      const double* xr = x.data.data() + r * n;
      double mean = 0.0;
      for (int j = 0; j < n; ++j) mean += xr[j];
      mean /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
      var /= n;
      double is = 1.0 / std::sqrt(var + eps);
      inv_std.data[r] = is;
      for (int j = 0; j < n; ++j) {
        double xh = (xr[j] - mean) * is;
        xhat.data[r * n + j] = xh;
        out.data[r * n + j] = xh * val(gamma).data[j] + val(beta).data[j];
      }
    }
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto is = std::make_shared<Tensor>(std::move(inv_std));
    return push(std::move(out), [a, gamma, beta, rows, n, xh, is](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& gm = t.val(gamma);
      Tensor& ga = t.grad(a);
      Tensor& gg = t.grad(gamma);
      Tensor& gb = t.grad(beta);
      for (int64_t r = 0; r < rows; ++r) {
        const double* gr = g.data.data() + r * n;
        const double* xhr = xh->data.data() + r * n;
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < n; ++j) {
          double dxh = gr[j] * gm.data[j];
          m1 += dxh;
          m2 += dxh * xhr[j];
          gg.data[j] += gr[j] * xhr[j];
          gb.data[j] += gr[j];
        }
        m1 /= n;
        m2 /= n;
        for (int j = 0; j < n; ++j) {
          double dxh = gr[j] * gm.data[j];
          ga.data[r * n + j] += is->data[r] * (dxh - m1 - xhr[j] * m2);
        }
      }
    });
  }

  // Rows scaled to unit L2 norm; throws on a near-zero row.
  Id l2_normalize_rows(Id a) {
    const Tensor& x = val(a);
    int n = x.dim(-1);
    int64_t rows = x.rows_as_matrix();
    Tensor out(x.shape);
    auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += x.data[r * n + j] * x.data[r * n + j];
      double nrm = std::sqrt(s);
      if (nrm < 1e-12) throw Error("l2_normalize: zero-norm row");
      (*norms)[static_cast<size_t>(r)] = nrm;
      for (int j = 0; j < n; ++j) out.data[r * n + j] = x.data[r * n + j] / nrm;
    }
    return push(std::move(out), [a, rows, n, norms](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      const Tensor& u = t.val(id);
      Tensor& ga = t.grad(a);
      for (int64_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g.data[r * n + j] * u.data[r * n + j];
        double inv = 1.0 / (*norms)[static_cast<size_t>(r)];
        for (int j = 0; j < n; ++j)
          ga.data[r * n + j] += (g.data[r * n + j] - u.data[r * n + j] * dot) * inv;
      }
    });
  }

  // ----- convolution -----

  // x [B,T,Cin], w [k,Cin,Cout], bias [Cout], stride s -> [B,T',Cout].
  Id conv1d(Id x, Id w, Id bias, int stride) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    if (tx.ndim() != 3 || tw.ndim() != 3)
      throw DimensionError("conv1d: expect x [B,T,C] and w [k,Cin,Cout]");
    int B = tx.shape[0], T = tx.shape[1], Cin = tx.shape[2];
    int k = tw.shape[0], Cout = tw.shape[2];
    if (tw.shape[1] != Cin)
      throw DimensionError("conv1d: weight Cin " + std::to_string(tw.shape[1]) +
                           " != input channels " + std::to_string(Cin));
    if (T < k)
      throw DimensionError("conv1d: input length " + std::to_string(T) +
                           " shorter than kernel " + std::to_string(k));
    if (stride < 1) throw ConfigError("conv1d: stride must be >= 1");
    int To = (T - k) / stride + 1;
    Tensor out({B, To, Cout});
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < To; ++t) {
        double* orow = out.data.data() + (static_cast<int64_t>(b) * To + t) * Cout;
        for (int j = 0; j < Cout; ++j) orow[j] = val(bias).data[j];
        for (int dt = 0; dt < k; ++dt) {
          const double* xrow =
              tx.data.data() + (static_cast<int64_t>(b) * T + t * stride + dt) * Cin;
          const double* wrow = tw.data.data() + static_cast<int64_t>(dt) * Cin * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            double xv = xrow[ci];
            if (xv == 0.0) continue;
            const double* wr = wrow + static_cast<int64_t>(ci) * Cout;
            for (int j = 0; j < Cout; ++j) orow[j] += xv * wr[j];
          }
        }
      }
    return push(std::move(out), [x, w, bias, stride, B, T, Cin, k, Cout, To](
                                    Tape& tp, Id id) {
      const Tensor& g = tp.grad(id);
      const Tensor& tx = tp.val(x);
      const Tensor& tw = tp.val(w);
      Tensor& gx = tp.grad(x);
      Tensor& gw = tp.grad(w);
      Tensor& gb = tp.grad(bias);
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < To; ++t) {
          const double* grow = g.data.data() + (static_cast<int64_t>(b) * To + t) * Cout;
          for (int j = 0; j < Cout; ++j) gb.data[j] += grow[j];
          for (int dt = 0; dt < k; ++dt) {
            int64_t xoff = (static_cast<int64_t>(b) * T + t * stride + dt) * Cin;
            const double* wrow = tw.data.data() + static_cast<int64_t>(dt) * Cin * Cout;
            double* gwrow = gw.data.data() + static_cast<int64_t>(dt) * Cin * Cout;
            for (int ci = 0; ci < Cin; ++ci) {
              double acc = 0.0;
              const double* wr = wrow + static_cast<int64_t>(ci) * Cout;
              double* gwr = gwrow + static_cast<int64_t>(ci) * Cout;
              double xv = tx.data[xoff + ci];
              for (int j = 0; j < Cout; ++j) {
                acc += grow[j] * wr[j];
                gwr[j] += grow[j] * xv;
              }
              gx.data[xoff + ci] += acc;
            }
          }
        }
    });
  }

  // ----- reductions / losses -----

  Id sum_all(Id a) {
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Tensor::scalar(s), [a](Tape& t, Id id) {
      double g = t.grad(id).data[0];
      Tensor& ga = t.grad(a);
      for (double& v : ga.data) v += g;
    });
  }

  Id mean_all(Id a) {
    int64_t n = val(a).numel();
    double s = 0.0;
    for (double v : val(a).data) s += v;
    return push(Tensor::scalar(s / static_cast<double>(n)), [a, n](Tape& t, Id id) {
      double g = t.grad(id).data[0] / static_cast<double>(n);
      Tensor& ga = t.grad(a);
      for (double& v : ga.data) v += g;
    });
  }

  Id sum_lastdim(Id a) {
    const Tensor& x = val(a);
    int n = x.dim(-1);
    int64_t rows = x.rows_as_matrix();
    std::vector<int> shape(x.shape.begin(), x.shape.end() - 1);
    if (shape.empty()) shape.push_back(1);
    Tensor out(shape);
    for (int64_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += x.data[r * n + j];
      out.data[r] = s;
    }
    return push(std::move(out), [a, rows, n](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad(a);
      for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < n; ++j) ga.data[r * n + j] += g.data[r];
    });
  }

  // Mean squared error against a constant target.
  Id mse(Id pred, const Tensor& target) {
    const Tensor& p = val(pred);
    if (!p.same_shape(target)) throw DimensionError("mse: shape mismatch");
    int64_t n = p.numel();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double d = p.data[i] - target.data[i];
      s += d * d;
    }
    auto tgt = std::make_shared<Tensor>(target);
    return push(Tensor::scalar(s / static_cast<double>(n)),
                [pred, tgt, n](Tape& t, Id id) {
                  double g = 2.0 * t.grad(id).data[0] / static_cast<double>(n);
                  const Tensor& p = t.val(pred);
                  Tensor& gp = t.grad(pred);
                  for (int64_t i = 0; i < n; ++i)
                    gp.data[i] += g * (p.data[i] - tgt->data[i]);
                });
  }

  // ----- backward -----

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
  // Parameter gradients accumulate; internal node gradients are reset first,
  // so calling backward twice doubles parameter gradients.
  void backward(Id loss) {
    if (val(loss).numel() != 1)
      throw Error("backward: loss must be a scalar, got shape " +
                  shape_str(val(loss).shape));
    for (auto& n : nodes_) n.grad.fill(0.0);
    grad(loss).data[0] = 1.0;
    for (Id i = loss; i >= 0; --i) {
      auto& n = nodes_[static_cast<size_t>(i)];
      if (n.back) n.back(*this, i);
    }
  }

 private:
  Id push(Tensor val, std::function<void(Tape&, Id)> back) {
    Node n;
    n.grad = Tensor(val.shape);
    n.val = std::move(val);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  void check_broadcast(Id a, Id b, const char* op) const {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (tb.numel() == 1) return;
    if (ta.numel() % tb.numel() != 0 ||
        !std::equal(tb.shape.rbegin(), tb.shape.rend(), ta.shape.rbegin()))
      throw DimensionError(std::string(op) + ": shape " + shape_str(tb.shape) +
                           " does not broadcast to " + shape_str(ta.shape));
  }

  Id binary(Id a, Id b, double sign) {
    check_broadcast(a, b, sign > 0 ? "add" : "sub");
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    Tensor out(ta.shape);
    int64_t bn = tb.numel();
    for (int64_t i = 0; i < ta.numel(); ++i)
      out.data[i] = ta.data[i] + sign * tb.data[i % bn];
    return push(std::move(out), [a, b, bn, sign](Tape& t, Id id) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad(a);
      Tensor& gb = t.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i % bn] += sign * g.data[i];
      }
    });
  }

  // C[r,j] = sum_l A[r,l] * B[l,j]; C assumed zeroed.
  static void mm(const double* A, const double* B, double* C, int64_t m, int k,
                 int n) {
    for (int64_t r = 0; r < m; ++r) {
      double* crow = C + r * n;
      const double* arow = A + r * k;
      for (int l = 0; l < k; ++l) {
        double av = arow[l];
        if (av == 0.0) continue;
        const double* brow = B + static_cast<int64_t>(l) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace firm

#endif  // FIRM_AUTODIFF_HPP_
