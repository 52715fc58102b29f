// Copyright 2026 The Segsum Authors.
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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "segsum/numerics/optim.hpp"

namespace segsum::numerics {

struct ParameterGradError {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0;
  double mean_rel_error = 0;
};

struct GradCheckReport {
  std::size_t coordinates = 0;
  std::size_t within_tolerance = 0;
  double tolerance = 0;
  double max_rel_error = 0;
  double mean_rel_error = 0;
  std::vector<ParameterGradError> per_parameter;

  double fraction_within_tolerance() const {
    return coordinates ? static_cast<double>(within_tolerance) / coordinates : 1.0;
  }
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Compares the analytic gradient of `loss_fn` (a callable returning a scalar
// Tensor<double> built from `params`) against central differences with step
// `h`, coordinate by coordinate.
template <typename LossFn>
GradCheckReport grad_check(ParameterSet<double>& params, LossFn&& loss_fn,
                           double h, double tolerance) {
  auto evaluate = [&]() {
    const double loss = loss_fn().item();
    if (!std::isfinite(loss)) throw NumericError("grad_check: non-finite loss");
    return loss;
  };

  params.zero_grad();
  {
    Tensor<double> loss = loss_fn();
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    loss.backward();
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  double total = 0;
  for (auto& p : params) {
    ParameterGradError entry;
    entry.name = p.name;
    std::vector<double> analytic(p.tensor.size(), 0.0);
    if (p.tensor.has_grad()) {
      auto g = p.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    auto values = p.tensor.mutable_values();
    double param_total = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = [&] {
        NoGradGuard no_grad;
        return evaluate();
      }();
      values[i] = saved - h;
      const double down = [&] {
        NoGradGuard no_grad;
        return evaluate();
      }();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      entry.max_rel_error = std::max(entry.max_rel_error, err);
      param_total += err;
      if (err < tolerance) ++report.within_tolerance;
      ++report.coordinates;
    }
    entry.coordinates = values.size();
    entry.mean_rel_error = values.empty() ? 0.0 : param_total / values.size();
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    total += param_total;
    report.per_parameter.push_back(entry);
  }
  report.mean_rel_error = report.coordinates ? total / report.coordinates : 0.0;
  return report;
}

}  // namespace segsum::numerics
