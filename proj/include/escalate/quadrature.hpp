#pragma once

#include <functional>
#include <vector>

namespace escalate::quad {

/// Normalised 1-D posterior on a uniform grid (composite Simpson weights).
/// Built from an unnormalised log density; supports means, tail masses and
/// inverse-CDF draws for posterior summaries of a scalar parameter.
struct Posterior1D {
  std::vector<double> x;
  std::vector<double> mass;     // Simpson cell masses, sum to 1 (expectations)
  std::vector<double> density;  // trapezoid-normalised density (CDF queries)
  std::vector<double> cdf;

  double mean() const;
  double expectation(const std::function<double(double)>& f) const;
  /// P(parameter < cut).
  double mass_below(double cut) const;
  /// Inverse CDF at u in (0,1) with linear interpolation inside cells.
  double icdf(double u) const;
};

Posterior1D posterior_1d(const std::function<double(double)>& log_density, double lo, double hi, int nodes);

/// Nodes and weights for integrating e^{-x^2} f(x) dx; computed to machine
/// precision by Newton refinement of the Hermite roots.
struct GaussHermite {
  std::vector<double> node, weight;
};

GaussHermite gauss_hermite(int n);

}  // namespace escalate::quad
