#include "postfilter/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace postfilter::ad {
namespace {

double evaluate(const ScalarFn& f, SignalTensor& point) {
  Graph graph;
  return f(graph, graph.variable(point, false)).value().item();
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const SignalTensor& point, double h) {
  SignalTensor x = point;
  x.set_requires_grad(true);
  x.clear_grad();
  {
    Graph graph;
    Var loss = f(graph, graph.variable(x));
    graph.backward(loss);
  }
  std::vector<double> analytic(x.size(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = evaluate(f, x);
    x[i] = saved - h;
    const double down = evaluate(f, x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
    const double err = std::fabs(analytic[i] - numeric) / denom;
    if (err > result.max_rel_error || i == 0) {
      result = {err, i, analytic[i], numeric};
    }
  }
  return result;
}

}  // namespace postfilter::ad
