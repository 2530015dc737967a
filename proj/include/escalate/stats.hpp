#pragma once

#include <cstddef>
#include <vector>

// Small numeric helpers shared across the engines.

namespace escalate::stats {

double beta_cdf(double a, double b, double x);
/// P(X > x) for X ~ Beta(a, b).
double beta_tail(double a, double b, double x);
double normal_cdf(double x);

double logit(double p);
double expit(double x);

/// Compensated accumulation so parallel-collected results can be reduced in
/// a fixed order with bit-reproducible totals.
class KahanSum {
 public:
  void add(double v) {
    double y = v - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

double median(std::vector<double> v);
/// Median absolute deviation about the median (unscaled).
double mad(const std::vector<double>& v);

/// Weighted pool-adjacent-violators: non-decreasing fit minimising weighted
/// squared error. Ties in the solution keep block means.
std::vector<double> pava_isotonic(const std::vector<double>& y, const std::vector<double>& w);

}  // namespace escalate::stats
