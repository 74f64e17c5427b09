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

// Minimal static SVG plots built from lines, polylines, rects and text.

#pragma once

#include <string>
#include <vector>

namespace bts::app {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series);

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  // drawn as a whisker when > 0
};

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars);

void write_text(const std::string& path, const std::string& text);

}  // namespace bts::app
