#pragma once

#include <functional>
#include <vector>

#include "escalate/linalg.hpp"

namespace escalate::opt {

using Objective = std::function<double(const std::vector<double>&)>;

struct NmResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
  int evaluations = 0;
};

/// Nelder-Mead minimisation with the standard reflect/expand/contract/shrink
/// moves. Deterministic for a given start and step.
NmResult nelder_mead(const Objective& f, std::vector<double> x0, double step, int max_iter, double tol);

/// Central-difference Hessian; `h` is the per-coordinate step.
la::Matrix numeric_hessian(const Objective& f, const std::vector<double>& x, double h);

}  // namespace escalate::opt
