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

#include "bts/bts_oft.hpp"

#include <cmath>

#include "bts/error.hpp"
#include "bts/ops.hpp"

namespace bts::oft {

OftConfig OftConfig::from_ratio(std::size_t channels, std::size_t heads,
                                double ratio) {
  if (heads == 0 || channels % heads != 0) {
    throw ValidationError("channels " + std::to_string(channels) +
                          " not divisible by heads " + std::to_string(heads));
  }
  OftConfig cfg;
  cfg.heads = heads;
  cfg.head_dim = channels / heads;
  cfg.fold_width = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(cfg.head_dim)));
  cfg.validate(channels);
  return cfg;
}

ad::Shape OftConfig::projection_shape() const {
  return {heads, fold_width, retained_width()};
}

void OftConfig::validate(std::size_t channels) const {
  if (heads == 0 || channels != heads * head_dim) {
    throw ValidationError("channel width " + std::to_string(channels) +
                          " is not heads x head_dim = " + std::to_string(heads) +
                          " x " + std::to_string(head_dim));
  }
  if (fold_width < 1 || fold_width >= head_dim) {
    throw ValidationError("fold width " + std::to_string(fold_width) +
                          " must satisfy 1 <= C_s < " + std::to_string(head_dim));
  }
  if (!(eps > 0.0)) throw ValidationError("OFT epsilon must be positive");
}

FoldView decompose(const ad::Tensor& tokens, const OftConfig& cfg) {
  if (tokens.rank() != 3) {
    throw ShapeError("decompose: expected [T, N, C], got " + ad::shape_str(tokens.shape()));
  }
  cfg.validate(tokens.dim(2));
  ad::Tensor heads = ad::reshape(
      tokens, {tokens.dim(0), tokens.dim(1), cfg.heads, cfg.head_dim});
  auto parts = ad::split(heads, 3, {cfg.fold_width, cfg.retained_width()});
  return {std::move(parts[0]), std::move(parts[1])};
}

ad::Tensor reassemble(const FoldView& folds, const OftConfig& cfg) {
  ad::Tensor heads = ad::concat({folds.u, folds.r}, 3);
  return ad::reshape(heads, {heads.dim(0), heads.dim(1), cfg.channels()});
}

ad::Tensor oft(const ad::Tensor& a, const ad::Tensor& b, double eps) {
  if (a.shape() != b.shape() || a.rank() == 0) {
    throw ShapeError("oft: operand shapes differ " + ad::shape_str(a.shape()) +
                     " vs " + ad::shape_str(b.shape()));
  }
  const std::size_t w = a.shape().back();
  const std::size_t rows = a.numel() / w;
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(a.numel());
  std::vector<double> coef(rows), denom(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ab = 0.0, bb = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      ab += av[r * w + j] * bv[r * w + j];
      bb += bv[r * w + j] * bv[r * w + j];
    }
    denom[r] = bb + eps;
    coef[r] = ab / denom[r];
    for (std::size_t j = 0; j < w; ++j) {
      out[r * w + j] = av[r * w + j] - coef[r] * bv[r * w + j];
    }
  }
  ad::Tensor result = ad::make_result(a.shape(), std::move(out));
  if (ad::should_record({&a, &b})) {
    auto ai = a.impl(), bi = b.impl(), oi = result.impl();
    ad::active_tape()->record(
        "oft", {a, b}, result,
        [=, coef = std::move(coef), denom = std::move(denom)] {
          const auto& g = oi->grad;
          const auto& x = ai->data;
          const auto& y = bi->data;
          for (std::size_t r = 0; r < rows; ++r) {
            double gb = 0.0;
            for (std::size_t j = 0; j < w; ++j) gb += g[r * w + j] * y[r * w + j];
            // d/da: g - b <g, b> / D
            if (ai->requires_grad) {
              auto& ga = ai->ensure_grad();
              for (std::size_t j = 0; j < w; ++j) {
                ga[r * w + j] += g[r * w + j] - y[r * w + j] * gb / denom[r];
              }
            }
            // d/db: -<g, b> (a / D - 2 <a, b> b / D^2) - k g
            if (bi->requires_grad) {
              auto& gy = bi->ensure_grad();
              for (std::size_t j = 0; j < w; ++j) {
                gy[r * w + j] += -gb * (x[r * w + j] - 2.0 * coef[r] * y[r * w + j]) / denom[r] -
                                 coef[r] * g[r * w + j];
              }
            }
          }
        });
  }
  return result;
}

ad::Tensor target_context(const ad::Tensor& retained, const ad::Tensor& projections) {
  // retained [T, N, H, R], projections [H, C_s, R]
  if (retained.rank() != 4 || projections.rank() != 3 ||
      projections.dim(0) != retained.dim(2) || projections.dim(2) != retained.dim(3)) {
    throw ShapeError("target_context: projections " +
                     ad::shape_str(projections.shape()) + " do not fit retained " +
                     ad::shape_str(retained.shape()));
  }
  const std::size_t T = retained.dim(0), N = retained.dim(1), H = retained.dim(2);
  const std::size_t R = retained.dim(3), S = projections.dim(1);
  ad::Tensor by_head = ad::reshape(ad::permute(retained, {2, 0, 1, 3}), {H, T * N, R});
  ad::Tensor proj_t = ad::permute(projections, {0, 2, 1});  // [H, R, C_s]
  ad::Tensor ctx = ad::matmul(by_head, proj_t);                // [H, T*N, C_s]
  return ad::permute(ad::reshape(ctx, {H, T, N, S}), {1, 2, 0, 3});
}

ad::Tensor bts_apply(const ad::Tensor& tokens,
                     const sched::ButterflySchedule& schedule, std::size_t cycle,
                     std::size_t stage, const ad::Tensor& projections,
                     const OftConfig& cfg) {
  if (tokens.rank() != 3 || tokens.dim(0) != schedule.clip_length()) {
    throw ShapeError("bts_apply: tokens " + ad::shape_str(tokens.shape()) +
                     " do not match schedule clip length " +
                     std::to_string(schedule.clip_length()));
  }
  if (projections.shape() != cfg.projection_shape()) {
    throw ShapeError("bts_apply: projections " + ad::shape_str(projections.shape()) +
                     " expected " + ad::shape_str(cfg.projection_shape()));
  }
  FoldView folds = decompose(tokens, cfg);
  ad::Tensor source = ad::take_rows(folds.u, schedule.partner_map(cycle, stage));
  ad::Tensor context = target_context(folds.r, projections);
  ad::Tensor transferred = oft(source, context, cfg.eps);
  return reassemble({transferred, folds.r}, cfg);
}

}  // namespace bts::oft
