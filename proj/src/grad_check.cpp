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

#include "bts/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "bts/error.hpp"

namespace bts::ad {

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFunction& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& in : inputs) leaves.push_back(in.detach(true));

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor out = f(leaves);
    tape.backward(out);
    for (const Tensor& leaf : leaves) analytic.push_back(leaf.grad());
  }

  auto eval = [&]() {
    NoGradScope no_grad;
    const double v = f(leaves).item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
    return v;
  };

  GradCheckReport report;
  report.per_input.assign(leaves.size(), 0.0);
  for (std::size_t q = 0; q < leaves.size(); ++q) {
    auto values = leaves[q].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = eval();
      values[i] = original - options.step;
      const double minus = eval();
      values[i] = original;
      report.evaluations += 2;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[q][i];
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        throw NumericalError("grad_check: non-finite gradient entry");
      }
      report.per_input[q] = std::max(report.per_input[q],
                                     relative_error(a, numeric, options.abs_floor));
    }
    report.max_rel_error = std::max(report.max_rel_error, report.per_input[q]);
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace bts::ad
