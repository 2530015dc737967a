#include "escalate/optim.hpp"

#include <algorithm>
#include <cmath>

namespace escalate::opt {

NmResult nelder_mead(const Objective& f, std::vector<double> x0, double step, int max_iter, double tol) {
  const int n = static_cast<int>(x0.size());
  NmResult res;
  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fx(n + 1);
  for (int i = 0; i < n; ++i) simplex[i + 1][i] += step;
  for (int i = 0; i <= n; ++i) fx[i] = f(simplex[i]);
  res.evaluations = n + 1;

  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (int i = 0; i <= n; ++i) {
      s2[i] = simplex[idx[i]];
      f2[i] = fx[idx[i]];
    }
    simplex.swap(s2);
    fx.swap(f2);
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    order();
    if (std::fabs(fx[n] - fx[0]) < tol * (std::fabs(fx[0]) + tol)) {
      res.converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) centroid[j] += simplex[i][j] / n;

    auto blend = [&](double coef) {
      std::vector<double> p(n);
      for (int j = 0; j < n; ++j) p[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
      return p;
    };

    std::vector<double> refl = blend(-1.0);
    double fr = f(refl);
    ++res.evaluations;
    if (fr < fx[0]) {
      std::vector<double> exp_pt = blend(-2.0);
      double fe = f(exp_pt);
      ++res.evaluations;
      if (fe < fr) {
        simplex[n] = exp_pt;
        fx[n] = fe;
      } else {
        simplex[n] = refl;
        fx[n] = fr;
      }
    } else if (fr < fx[n - 1]) {
      simplex[n] = refl;
      fx[n] = fr;
    } else {
      bool outside = fr < fx[n];
      std::vector<double> contr = blend(outside ? -0.5 : 0.5);
      double fc = f(contr);
      ++res.evaluations;
      if (fc < std::min(fr, fx[n])) {
        simplex[n] = contr;
        fx[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int j = 0; j < n; ++j) simplex[i][j] = 0.5 * (simplex[i][j] + simplex[0][j]);
          fx[i] = f(simplex[i]);
        }
        res.evaluations += n;
      }
    }
  }
  order();
  res.x = simplex[0];
  res.value = fx[0];
  return res;
}

la::Matrix numeric_hessian(const Objective& f, const std::vector<double>& x, double h) {
  const int n = static_cast<int>(x.size());
  la::Matrix hess(n, std::vector<double>(n, 0.0));
  double f0 = f(x);
  std::vector<double> p = x;
  for (int i = 0; i < n; ++i) {
    p[i] = x[i] + h;
    double fp = f(p);
    p[i] = x[i] - h;
    double fm = f(p);
    p[i] = x[i];
    hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      p[i] = x[i] + h;
      p[j] = x[j] + h;
      double fpp = f(p);
      p[j] = x[j] - h;
      double fpm = f(p);
      p[i] = x[i] - h;
      double fmm = f(p);
      p[j] = x[j] + h;
      double fmp = f(p);
      p[i] = x[i];
      p[j] = x[j];
      hess[i][j] = hess[j][i] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return hess;
}

}  // namespace escalate::opt
