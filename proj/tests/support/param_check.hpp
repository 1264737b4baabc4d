#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "postfilter/autodiff/graph.hpp"
#include "postfilter/models/parameters.hpp"

namespace oracle {

// Backprop gradients of every `step`-th parameter entry against central
// differences. `loss` builds the scalar on a fresh graph, binding `params`
// as trainable leaves.
template <typename LossFn>
double param_grad_error(postfilter::models::ParameterList& params, LossFn loss, double h = 1e-5,
                        std::size_t step = 1) {
  using postfilter::ad::Graph;
  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
  auto eval = [&]() {
    Graph g;
    return loss(g).value().item();
  };
  double worst = 0.0;
  std::size_t counter = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params.tensor(i);
    for (std::size_t k = 0; k < t.size(); ++k, ++counter) {
      if (counter % step != 0) continue;
      const double saved = t[k];
      t[k] = saved + h;
      const double up = eval();
      t[k] = saved - h;
      const double down = eval();
      t[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  params.zero_grad();
  return worst;
}

}  // namespace oracle
