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

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bts/tensor.hpp"

namespace bts::ad {

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  // Entries where both gradients are smaller than this are compared by
  // absolute difference. Central differences carry ~eps*|f|/step of noise,
  // about 4e-9 for |f| ~ 20 at step 1e-6, so a tolerance of 1e-4 on values
  // below the floor means an absolute error below 1e-8.
  double abs_floor = 1e-4;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Per-input maxima, same order as the inputs passed in.
  std::vector<double> per_input;
  std::size_t evaluations = 0;
  bool passed = false;
};

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares the tape gradient of `f` (must return one value) with central
/// differences, perturbing every element of every input in place. Inputs are
/// restored afterwards. Throws NumericalError on non-finite values.
GradCheckReport grad_check(const ScalarFunction& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

/// Elementwise relative error with the floor described above.
double relative_error(double analytic, double numeric, double abs_floor);

}  // namespace bts::ad
