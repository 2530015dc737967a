#include "escalate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace escalate::stats {

double beta_cdf(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

double beta_tail(double a, double b, double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return boost::math::ibetac(a, b, x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double logit(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("logit argument must be in (0,1)");
  return std::log(p / (1.0 - p));
}

double expit(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty vector");
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

double mad(const std::vector<double>& v) {
  double m = median(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::fabs(v[i] - m);
  return median(std::move(dev));
}

std::vector<double> pava_isotonic(const std::vector<double>& y, const std::vector<double>& w) {
  if (y.size() != w.size()) throw std::invalid_argument("isotonic inputs must have equal length");
  std::size_t n = y.size();
  std::vector<double> mean, weight;
  std::vector<std::size_t> count;
  mean.reserve(n);
  weight.reserve(n);
  count.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] <= 0.0) throw std::invalid_argument("isotonic weights must be positive");
    mean.push_back(y[i]);
    weight.push_back(w[i]);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      double wsum = weight[weight.size() - 2] + weight.back();
      double pooled = (weight[weight.size() - 2] * mean[mean.size() - 2] + weight.back() * mean.back()) / wsum;
      mean.pop_back();
      weight.pop_back();
      std::size_t c = count.back();
      count.pop_back();
      mean.back() = pooled;
      weight.back() = wsum;
      count.back() += c;
    }
  }
  std::vector<double> fit;
  fit.reserve(n);
  for (std::size_t b = 0; b < mean.size(); ++b)
    for (std::size_t k = 0; k < count[b]; ++k) fit.push_back(mean[b]);
  return fit;
}

}  // namespace escalate::stats
