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

// Differentiable operations over bts::ad::Tensor.
//
// Shapes are aligned explicitly. The only implicit broadcast is a
// single-value operand against a tensor in the binary elementwise ops.

#pragma once

#include <cstddef>
#include <vector>

#include "bts/tensor.hpp"

namespace bts::ad {

enum class ElemOp { kAdd, kSub, kMul, kDiv, kNeg, kSqrt, kSquare };

/// Binary kinds need `b`; unary kinds ignore it.
Tensor elementwise(ElemOp op, const Tensor& a, const Tensor& b = Tensor());

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
/// tanh-approximated GELU.
Tensor gelu(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }

/// a[..., m, k] x b[..., k, n] -> [..., m, n]; leading extents must be equal.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., k] W[k, n] + bias[n] -> [..., n]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

enum class ReduceOp { kSum, kMean };

/// Removes `axis`.
Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis);
inline Tensor sum(const Tensor& a, std::size_t axis) { return reduce(ReduceOp::kSum, a, axis); }
inline Tensor mean(const Tensor& a, std::size_t axis) { return reduce(ReduceOp::kMean, a, axis); }
/// Sum of every element as a rank-0 tensor.
Tensor sum_all(const Tensor& a);

Tensor softmax_lastaxis(const Tensor& a);

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes each last-axis slice, then applies gain[C] and bias[C].
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps = kLayerNormEps);

std::vector<Tensor> split(const Tensor& a, std::size_t axis,
                          const std::vector<std::size_t>& parts);
Tensor concat(const std::vector<Tensor>& pieces, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
/// out.shape[i] = a.shape[perm[i]].
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);

/// Gathers slices along axis 0: out[i, ...] = a[index[i], ...]. Indices may
/// repeat; gradients are scatter-added.
Tensor take_rows(const Tensor& a, const std::vector<std::size_t>& index);

}  // namespace bts::ad
