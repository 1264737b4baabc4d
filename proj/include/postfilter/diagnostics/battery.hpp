#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "postfilter/autodiff/grad_check.hpp"
#include "postfilter/io/files.hpp"
#include "postfilter/models/parameters.hpp"

namespace postfilter::diagnostics {

/// Gradients of a scalar with respect to every entry of `params`, checked by
/// central differences. `loss` must bind the parameters as trainable leaves.
/// Coordinates that disagree at step h are measured again at h/10 and h/100
/// and keep their smallest error, so a leaky_relu or abs kink that happens to
/// lie within h of the point is not reported as a wrong gradient. The error
/// of a coordinate is |a - n| / max(|a|, |n|, 1e-8, 1e-6 max|a|).
ad::GradCheckResult grad_check_parameters(models::ParameterList& params,
                                          const std::function<ad::Var(ad::Graph&)>& loss, double h = 1e-5);

/// One gradient check, drawing its shapes and values from `seed`.
struct BatteryCase {
  std::string name;
  double tolerance = 1e-4;
  std::function<ad::GradCheckResult(std::uint64_t seed)> run;
};

/// Every autodiff op, followed by the generator, frontend, discriminator and
/// objective compositions.
std::vector<BatteryCase> autodiff_battery();

struct BatteryOutcome {
  std::string name;
  double tolerance = 0.0;
  std::size_t seeds = 0;
  ad::GradCheckResult worst;
  std::uint64_t worst_seed = 0;
  double seconds = 0.0;

  bool passed() const { return worst.max_rel_error < tolerance; }
};

/// Runs each case whose name starts with `filter` over seeds first_seed ..
/// first_seed + seeds - 1.
std::vector<BatteryOutcome> run_battery(std::size_t seeds, std::uint64_t first_seed = 0,
                                        const std::string& filter = "");

/// case, tolerance, seeds, max_rel_error, worst_seed, seconds, passed.
io::CsvTable battery_table(const std::vector<BatteryOutcome>& outcomes);

}  // namespace postfilter::diagnostics
