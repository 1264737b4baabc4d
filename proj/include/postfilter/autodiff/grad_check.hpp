#pragma once

#include <functional>

#include "postfilter/autodiff/graph.hpp"

namespace postfilter::ad {

/// Builds a scalar from a variable bound to the evaluation point.
using ScalarFn = std::function<Var(Graph&, Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the reverse-mode gradient of `f` at `point` with central
/// differences of step `h`, coordinate by coordinate. The error of a
/// coordinate is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const ScalarFn& f, const SignalTensor& point, double h = 1e-5);

}  // namespace postfilter::ad
