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

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "resunet/ops.hpp"

namespace resunet::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

/// Largest norm-wise relative error between reverse-mode and central
/// finite-difference gradients over all inputs.
inline double gradcheck(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                        const std::vector<Tensor<double>>& inputs, double h = 1e-6) {
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(parameter(t));
  backward(f(vars));

  double worst = 0;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      std::vector<Var<double>> plus, minus;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        Tensor<double> a = inputs[j], b = inputs[j];
        if (j == k) {
          a[i] += h;
          b[i] -= h;
        }
        plus.push_back(constant(a));
        minus.push_back(constant(b));
      }
      const double numeric = (f(plus).value()[0] - f(minus).value()[0]) / (2 * h);
      const double analytic = vars[k].grad()[i];
      diff += (numeric - analytic) * (numeric - analytic);
      scale += numeric * numeric + analytic * analytic;
    }
    const double err = std::sqrt(diff) / std::max(std::sqrt(scale), 1e-10);
    worst = std::max(worst, err);
  }
  return worst;
}

/// Scalar projection sum(w * y) with fixed random weights, so that every
/// output element contributes a distinct gradient.
inline Var<double> project(const Var<double>& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, constant(random_tensor(y.shape(), rng))));
}

}  // namespace resunet::testing
