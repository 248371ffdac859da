#pragma once

// Built-in self-checks run by `octsim validate`. Each suite exercises one
// identity on small inputs and reports a measured quantity.

#include "octsim/layered.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace octsim {

struct SuiteResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  std::string detail;
};

/// Replaceable building blocks, so the suites can be shown to catch faults.
struct ValidationHooks {
  std::function<FresnelCoefficients(double, double)> fresnel = octsim::fresnel;
};

std::vector<SuiteResult> run_validation(const ValidationHooks& hooks = {}, std::uint64_t seed = 1);

}  // namespace octsim
