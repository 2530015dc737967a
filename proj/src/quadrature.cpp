#include "escalate/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace escalate::quad {

double Posterior1D::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m += x[i] * mass[i];
  return m;
}

double Posterior1D::expectation(const std::function<double(double)>& f) const {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m += f(x[i]) * mass[i];
  return m;
}

double Posterior1D::mass_below(double cut) const {
  if (cut <= x.front()) return 0.0;
  if (cut >= x.back()) return 1.0;
  double step = x[1] - x[0];
  auto i = static_cast<std::size_t>((cut - x.front()) / step);
  if (i >= x.size() - 1) i = x.size() - 2;
  double dx = cut - x[i];
  double slope = (density[i + 1] - density[i]) / step;
  return std::clamp(cdf[i] + density[i] * dx + 0.5 * slope * dx * dx, 0.0, 1.0);
}

double Posterior1D::icdf(double u) const {
  if (u <= 0.0 || u >= 1.0) throw std::invalid_argument("icdf argument must be in (0,1)");
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = it == cdf.begin() ? 0 : static_cast<std::size_t>(it - cdf.begin()) - 1;
  if (i >= x.size() - 1) i = x.size() - 2;
  double step = x[1] - x[0];
  double need = u - cdf[i];
  double slope = (density[i + 1] - density[i]) / step;
  double dx;
  if (std::fabs(slope) < 1e-14 * (density[i] + 1e-300)) {
    dx = density[i] > 0.0 ? need / density[i] : 0.5 * step;
  } else {
    double disc = density[i] * density[i] + 2.0 * slope * need;
    dx = disc > 0.0 ? (-density[i] + std::sqrt(disc)) / slope : 0.5 * step;
  }
  return x[i] + std::clamp(dx, 0.0, step);
}

Posterior1D posterior_1d(const std::function<double(double)>& log_density, double lo, double hi, int nodes) {
  if (nodes < 3 || nodes % 2 == 0) throw std::invalid_argument("posterior_1d needs an odd node count >= 3");
  if (!(hi > lo)) throw std::invalid_argument("posterior_1d needs hi > lo");
  Posterior1D p;
  p.x.resize(nodes);
  p.mass.resize(nodes);
  p.density.resize(nodes);
  p.cdf.resize(nodes);
  double step = (hi - lo) / (nodes - 1);
  double peak = -1e308;
  std::vector<double> logf(nodes);
  for (int i = 0; i < nodes; ++i) {
    p.x[i] = lo + i * step;
    logf[i] = log_density(p.x[i]);
    peak = std::max(peak, logf[i]);
  }
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    double simpson = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    p.density[i] = std::exp(logf[i] - peak);
    p.mass[i] = simpson * p.density[i];
    total += p.mass[i];
  }
  if (!(total > 0.0)) throw std::runtime_error("posterior_1d: density vanished on the grid");
  for (double& m : p.mass) m /= total;
  // separate trapezoid normalisation keeps the CDF monotone and exact at 1
  double trap = 0.0;
  for (int i = 0; i + 1 < nodes; ++i) trap += 0.5 * (p.density[i] + p.density[i + 1]) * step;
  for (double& d : p.density) d /= trap;
  p.cdf[0] = 0.0;
  for (int i = 0; i + 1 < nodes; ++i)
    p.cdf[i + 1] = p.cdf[i] + 0.5 * (p.density[i] + p.density[i + 1]) * step;
  p.cdf[nodes - 1] = 1.0;
  return p;
}

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite needs n >= 1");
  GaussHermite gh;
  gh.node.resize(n);
  gh.weight.resize(n);
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  int m = (n + 1) / 2;
  double z = 0.0, pp = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      z -= 1.14 * std::pow(n, 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * gh.node[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * gh.node[1];
    else
      z = 2.0 * z - gh.node[i - 2];
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) < 1e-15) break;
    }
    gh.node[i] = z;
    gh.node[n - 1 - i] = -z;
    gh.weight[i] = 2.0 / (pp * pp);
    gh.weight[n - 1 - i] = gh.weight[i];
  }
  if (n % 2 == 1) gh.node[n / 2] = 0.0;
  return gh;
}

}  // namespace escalate::quad
