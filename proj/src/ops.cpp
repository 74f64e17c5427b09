// Copyright (c) 2026 The bts-rppg Authors. All Rights Reserved.
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

#include "bts/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "bts/error.hpp"

namespace bts::ad {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

// Extents before, along and after `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void check_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " invalid for shape " + shape_str(a.shape()));
  }
}

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] B[k,n]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* dc,
             const double* b, double* da) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

// dB[k,n] += A[m,k]^T dC[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* dc, double* db) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* drow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
    }
  }
}

bool is_binary(ElemOp op) {
  return op == ElemOp::kAdd || op == ElemOp::kSub || op == ElemOp::kMul ||
         op == ElemOp::kDiv;
}

const char* elem_name(ElemOp op) {
  switch (op) {
    case ElemOp::kAdd: return "add";
    case ElemOp::kSub: return "sub";
    case ElemOp::kMul: return "mul";
    case ElemOp::kDiv: return "div";
    case ElemOp::kNeg: return "neg";
    case ElemOp::kSqrt: return "sqrt";
    case ElemOp::kSquare: return "square";
  }
  return "?";
}

Tensor binary(ElemOp op, const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) {
    throw ShapeError(std::string(elem_name(op)) + ": missing operand");
  }
  Shape out_shape;
  if (a.shape() == b.shape()) {
    out_shape = a.shape();
  } else if (b.numel() == 1 && a.numel() >= 1 &&
             (a.numel() > 1 || a.rank() >= b.rank())) {
    out_shape = a.shape();
  } else if (a.numel() == 1) {
    out_shape = b.shape();
  } else {
    throw ShapeError(std::string(elem_name(op)) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t n = shape_numel(out_shape);
  const std::size_t sa = a.numel() == n ? 1 : 0;
  const std::size_t sb = b.numel() == n ? 1 : 0;
  const double* x = a.data().data();
  const double* y = b.data().data();
  std::vector<double> out(n);
  switch (op) {
    case ElemOp::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i * sa] + y[i * sb];
      break;
    case ElemOp::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i * sa] - y[i * sb];
      break;
    case ElemOp::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i * sa] * y[i * sb];
      break;
    case ElemOp::kDiv:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i * sa] / y[i * sb];
      break;
    default:
      break;
  }
  Tensor result = make_result(std::move(out_shape), std::move(out));
  if (should_record({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), oi = result.impl();
    active_tape()->record(elem_name(op), {a, b}, result, [=] {
      const auto& g = oi->grad;
      const double* xv = ai->data.data();
      const double* yv = bi->data.data();
      if (ai->requires_grad) {
        auto& ga = ai->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double d = 0.0;
          switch (op) {
            case ElemOp::kAdd: d = g[i]; break;
            case ElemOp::kSub: d = g[i]; break;
            case ElemOp::kMul: d = g[i] * yv[i * sb]; break;
            case ElemOp::kDiv: d = g[i] / yv[i * sb]; break;
            default: break;
          }
          ga[i * sa] += d;
        }
      }
      if (bi->requires_grad) {
        auto& gb = bi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          double d = 0.0;
          switch (op) {
            case ElemOp::kAdd: d = g[i]; break;
            case ElemOp::kSub: d = -g[i]; break;
            case ElemOp::kMul: d = g[i] * xv[i * sa]; break;
            case ElemOp::kDiv: {
              const double yy = yv[i * sb];
              d = -g[i] * xv[i * sa] / (yy * yy);
              break;
            }
            default: break;
          }
          gb[i * sb] += d;
        }
      }
    });
  }
  return result;
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& a, Fwd fwd, Deriv deriv) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  const double* x = a.data().data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x[i]);
  Tensor result = make_result(a.shape(), std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record(name, {a}, result, [=] {
      auto& ga = ai->ensure_grad();
      const auto& g = oi->grad;
      for (std::size_t i = 0; i < n; ++i) {
        ga[i] += g[i] * deriv(ai->data[i], oi->data[i]);
      }
    });
  }
  return result;
}

}  // namespace

Tensor elementwise(ElemOp op, const Tensor& a, const Tensor& b) {
  if (is_binary(op)) return binary(op, a, b);
  switch (op) {
    case ElemOp::kNeg:
      return unary("neg", a, [](double x) { return -x; },
                   [](double, double) { return -1.0; });
    case ElemOp::kSqrt:
      return unary("sqrt", a, [](double x) { return std::sqrt(x); },
                   [](double, double y) { return 0.5 / y; });
    case ElemOp::kSquare:
      return unary("square", a, [](double x) { return x * x; },
                   [](double x, double) { return 2.0 * x; });
    default:
      throw ShapeError("unsupported elementwise op");
  }
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(ElemOp::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(ElemOp::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(ElemOp::kMul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(ElemOp::kDiv, a, b); }
Tensor neg(const Tensor& a) { return elementwise(ElemOp::kNeg, a); }
Tensor sqrt(const Tensor& a) { return elementwise(ElemOp::kSqrt, a); }
Tensor square(const Tensor& a) { return elementwise(ElemOp::kSquare, a); }

Tensor gelu(const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double kA = 0.044715;
  return unary(
      "gelu", a,
      [](double x) {
        return 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
      },
      [](double x, double) {
        const double t = std::tanh(kC * (x + kA * x * x * x));
        return 0.5 * (1.0 + t) +
               0.5 * x * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * x * x);
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || a.rank() != b.rank()) {
    throw ShapeError("matmul: ranks must match and be >= 2, got " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t r = a.rank();
  for (std::size_t i = 0; i + 2 < r; ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw ShapeError("matmul: batch extents differ " + shape_str(a.shape()) +
                       " x " + shape_str(b.shape()));
    }
  }
  const std::size_t m = a.dim(r - 2), k = a.dim(r - 1), n = b.dim(r - 1);
  if (b.dim(r - 2) != k) {
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape = a.shape();
  out_shape[r - 1] = n;
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    gemm_nn(m, k, n, a.data().data() + bi * m * k, b.data().data() + bi * k * n,
            out.data() + bi * m * n);
  }
  Tensor result = make_result(std::move(out_shape), std::move(out));
  if (should_record({&a, &b})) {
    ImplPtr ai = a.impl(), bi_ = b.impl(), oi = result.impl();
    active_tape()->record("matmul", {a, b}, result, [=] {
      const double* g = oi->grad.data();
      if (ai->requires_grad) {
        double* ga = ai->ensure_grad().data();
        for (std::size_t q = 0; q < batch; ++q) {
          gemm_nt(m, k, n, g + q * m * n, bi_->data.data() + q * k * n,
                  ga + q * m * k);
        }
      }
      if (bi_->requires_grad) {
        double* gb = bi_->ensure_grad().data();
        for (std::size_t q = 0; q < batch; ++q) {
          gemm_tn(m, k, n, ai->data.data() + q * m * k, g + q * m * n,
                  gb + q * k * n);
        }
      }
    });
  }
  return result;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() < 1 || weight.rank() != 2 || x.dim(x.rank() - 1) != weight.dim(0)) {
    throw ShapeError("linear: cannot apply weight " + shape_str(weight.shape()) +
                     " to input " + shape_str(x.shape()));
  }
  const std::size_t k = weight.dim(0), n = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != n)) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()) +
                     " does not match output width " + std::to_string(n));
  }
  const std::size_t rows = x.numel() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  std::vector<double> out(rows * n, 0.0);
  if (bias.defined()) {
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(bias.data().begin(), bias.data().end(), out.begin() + i * n);
    }
  }
  gemm_nn(rows, k, n, x.data().data(), weight.data().data(), out.data());
  Tensor result = make_result(std::move(out_shape), std::move(out));
  if (should_record({&x, &weight, &bias})) {
    ImplPtr xi = x.impl(), wi = weight.impl(), oi = result.impl();
    ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    active_tape()->record("linear", inputs, result, [=] {
      const double* g = oi->grad.data();
      if (xi->requires_grad) {
        gemm_nt(rows, k, n, g, wi->data.data(), xi->ensure_grad().data());
      }
      if (wi->requires_grad) {
        gemm_tn(rows, k, n, xi->data.data(), g, wi->ensure_grad().data());
      }
      if (bi && bi->requires_grad) {
        auto& gb = bi->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
      }
    });
  }
  return result;
}

Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis) {
  check_axis(a, axis, op == ReduceOp::kSum ? "sum" : "mean");
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const double factor = op == ReduceOp::kMean ? 1.0 / static_cast<double>(s.extent) : 1.0;
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double* x = a.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = x + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  if (factor != 1.0) {
    for (double& v : out) v *= factor;
  }
  Tensor result = make_result(std::move(out_shape), std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record(op == ReduceOp::kSum ? "sum" : "mean", {a}, result, [=] {
      auto& ga = ai->ensure_grad();
      const auto& g = oi->grad;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t e = 0; e < s.extent; ++e) {
          double* dst = ga.data() + (o * s.extent + e) * s.inner;
          const double* src = g.data() + o * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) dst[i] += factor * src[i];
        }
      }
    });
  }
  return result;
}

Tensor sum_all(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor result = make_result({}, {total});
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record("sum_all", {a}, result, [=] {
      auto& ga = ai->ensure_grad();
      const double g = oi->grad[0];
      for (double& v : ga) v += g;
    });
  }
  return result;
}

Tensor softmax_lastaxis(const Tensor& a) {
  if (a.rank() == 0) throw ShapeError("softmax: rank-0 input");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  std::vector<double> out(a.numel());
  const double* x = a.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * c;
    double* yr = out.data() + r * c;
    const double mx = *std::max_element(xr, xr + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    for (std::size_t j = 0; j < c; ++j) yr[j] /= total;
  }
  Tensor result = make_result(a.shape(), std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record("softmax", {a}, result, [=] {
      auto& ga = ai->ensure_grad();
      const auto& g = oi->grad;
      const auto& y = oi->data;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
        }
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (a.rank() == 0) throw ShapeError("layer_norm: rank-0 input");
  const std::size_t c = a.shape().back();
  if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != c || bias.dim(0) != c) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(c) + "]");
  }
  const std::size_t rows = a.numel() / c;
  std::vector<double> out(a.numel());
  std::vector<double> xhat(a.numel());
  std::vector<double> inv_std(rows);
  const double* x = a.data().data();
  const double* gv = gain.data().data();
  const double* bv = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mu) * inv;
      xhat[r * c + j] = h;
      out[r * c + j] = h * gv[j] + bv[j];
    }
  }
  Tensor result = make_result(a.shape(), std::move(out));
  if (should_record({&a, &gain, &bias})) {
    ImplPtr ai = a.impl(), gi = gain.impl(), bi = bias.impl(), oi = result.impl();
    active_tape()->record(
        "layer_norm", {a, gain, bias}, result,
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
          const auto& g = oi->grad;
          if (gi->requires_grad) {
            auto& gg = gi->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < c; ++j) gg[j] += g[r * c + j] * xhat[r * c + j];
            }
          }
          if (bi->requires_grad) {
            auto& gb = bi->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
            }
          }
          if (ai->requires_grad) {
            auto& ga = ai->ensure_grad();
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t r = 0; r < rows; ++r) {
              double mean_d = 0.0, mean_dx = 0.0;
              for (std::size_t j = 0; j < c; ++j) {
                const double d = g[r * c + j] * gi->data[j];
                mean_d += d;
                mean_dx += d * xhat[r * c + j];
              }
              mean_d *= inv_c;
              mean_dx *= inv_c;
              for (std::size_t j = 0; j < c; ++j) {
                const double d = g[r * c + j] * gi->data[j];
                ga[r * c + j] += inv_std[r] * (d - mean_d - xhat[r * c + j] * mean_dx);
              }
            }
          }
        });
  }
  return result;
}

std::vector<Tensor> split(const Tensor& a, std::size_t axis,
                          const std::vector<std::size_t>& parts) {
  check_axis(a, axis, "split");
  const std::size_t total = std::accumulate(parts.begin(), parts.end(), std::size_t{0});
  if (total != a.dim(axis) || parts.empty() ||
      std::find(parts.begin(), parts.end(), 0) != parts.end()) {
    throw ShapeError("split: parts do not partition extent " +
                     std::to_string(a.dim(axis)));
  }
  const AxisSplit s = split_at(a.shape(), axis);
  std::vector<Tensor> pieces;
  pieces.reserve(parts.size());
  std::size_t offset = 0;
  for (std::size_t part : parts) {
    Shape shape = a.shape();
    shape[axis] = part;
    std::vector<double> out(s.outer * part * s.inner);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = a.data().data() + (o * s.extent + offset) * s.inner;
      std::copy(src, src + part * s.inner, out.begin() + o * part * s.inner);
    }
    Tensor piece = make_result(std::move(shape), std::move(out));
    if (should_record({&a})) {
      ImplPtr ai = a.impl(), oi = piece.impl();
      active_tape()->record("split", {a}, piece, [=] {
        auto& ga = ai->ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = oi->grad.data() + o * part * s.inner;
          double* dst = ga.data() + (o * s.extent + offset) * s.inner;
          for (std::size_t i = 0; i < part * s.inner; ++i) dst[i] += src[i];
        }
      });
    }
    pieces.push_back(std::move(piece));
    offset += part;
  }
  return pieces;
}

Tensor concat(const std::vector<Tensor>& pieces, std::size_t axis) {
  if (pieces.empty()) throw ShapeError("concat: no pieces");
  check_axis(pieces[0], axis, "concat");
  Shape shape = pieces[0].shape();
  std::size_t extent = 0;
  for (const Tensor& p : pieces) {
    Shape probe = p.shape();
    if (probe.size() != shape.size()) throw ShapeError("concat: rank mismatch");
    probe[axis] = shape[axis];
    if (probe != shape) {
      throw ShapeError("concat: incompatible piece " + shape_str(p.shape()));
    }
    extent += p.dim(axis);
  }
  shape[axis] = extent;
  const AxisSplit s = split_at(shape, axis);
  std::vector<double> out(shape_numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : pieces) {
    const std::size_t part = p.dim(axis);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = p.data().data() + o * part * s.inner;
      std::copy(src, src + part * s.inner,
                out.begin() + static_cast<std::ptrdiff_t>((o * s.extent + offset) * s.inner));
    }
    offsets.push_back(offset);
    offset += part;
  }
  Tensor result = make_result(std::move(shape), std::move(out));
  bool any = false;
  for (const Tensor& p : pieces) any = any || should_record({&p});
  if (any) {
    std::vector<ImplPtr> ins;
    for (const Tensor& p : pieces) ins.push_back(p.impl());
    ImplPtr oi = result.impl();
    active_tape()->record("concat", pieces, result, [=] {
      for (std::size_t q = 0; q < ins.size(); ++q) {
        if (!ins[q]->requires_grad) continue;
        auto& gp = ins[q]->ensure_grad();
        const std::size_t part = ins[q]->shape[axis];
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src = oi->grad.data() + (o * s.extent + offsets[q]) * s.inner;
          double* dst = gp.data() + o * part * s.inner;
          for (std::size_t i = 0; i < part * s.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  Tensor result = make_result(std::move(shape), a.values());
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record("reshape", {a}, result, [=] {
      auto& ga = ai->ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += oi->grad[i];
    });
  }
  return result;
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t r = a.rank();
  if (perm.size() != r) throw ShapeError("permute: wrong permutation length");
  std::vector<bool> seen(r, false);
  for (std::size_t p : perm) {
    if (p >= r || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * a.dim(i);
  Shape out_shape(r);
  std::vector<std::size_t> src_strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = a.dim(perm[i]);
    src_strides[i] = in_strides[perm[i]];
  }
  // map[out_flat] = in_flat
  const std::size_t n = a.numel();
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < n; ++o) {
    map[o] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      src += src_strides[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_strides[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  std::vector<double> out(n);
  for (std::size_t o = 0; o < n; ++o) out[o] = a.data()[map[o]];
  Tensor result = make_result(std::move(out_shape), std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record("permute", {a}, result, [=, map = std::move(map)] {
      auto& ga = ai->ensure_grad();
      for (std::size_t o = 0; o < map.size(); ++o) ga[map[o]] += oi->grad[o];
    });
  }
  return result;
}

Tensor take_rows(const Tensor& a, const std::vector<std::size_t>& index) {
  if (a.rank() == 0 || index.empty()) throw ShapeError("take_rows: bad input");
  const std::size_t rows = a.dim(0);
  const std::size_t width = a.numel() / rows;
  for (std::size_t i : index) {
    if (i >= rows) throw ShapeError("take_rows: index out of range");
  }
  Shape shape = a.shape();
  shape[0] = index.size();
  std::vector<double> out(index.size() * width);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double* src = a.data().data() + index[i] * width;
    std::copy(src, src + width, out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  Tensor result = make_result(std::move(shape), std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl(), oi = result.impl();
    active_tape()->record("take_rows", {a}, result, [=] {
      auto& ga = ai->ensure_grad();
      for (std::size_t i = 0; i < index.size(); ++i) {
        const double* src = oi->grad.data() + i * width;
        double* dst = ga.data() + index[i] * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
      }
    });
  }
  return result;
}

}  // namespace bts::ad
