#include "escalate/gibbs.hpp"

#include <cmath>
#include <stdexcept>

#include "escalate/linalg.hpp"
#include "escalate/rng.hpp"

namespace escalate::gibbs {

LmmFit fit_lmm(const LmmData& data, const LmmPrior& prior, std::uint64_t key, int burnin, int iterations) {
  const int n = static_cast<int>(data.y.size());
  if (n == 0) throw std::invalid_argument("fit_lmm: no data");
  if (data.covariate.size() != data.y.size() || data.subject.size() != data.y.size())
    throw std::invalid_argument("fit_lmm: ragged data");
  for (int s : data.subject)
    if (s < 0 || s >= data.subjects) throw std::invalid_argument("fit_lmm: subject index out of range");

  auto row = [&](int i) { return std::array<double, 3>{1.0, data.covariate[i][0], data.covariate[i][1]}; };

  // constant pieces of the coefficient update
  la::Matrix xtx(3, std::vector<double>(3, 0.0));
  for (int i = 0; i < n; ++i) {
    auto x = row(i);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) xtx[a][b] += x[a] * x[b];
  }

  rng::Stream rs(key);
  std::array<double, 3> beta = prior.mean;
  std::vector<double> re(data.subjects, 0.0);
  double sig_re2 = 1.0, sig_eps2 = 1.0;
  std::vector<int> per_subject(data.subjects, 0);
  for (int s : data.subject) ++per_subject[s];

  LmmFit fit;
  fit.beta_draws.reserve(iterations);
  for (int iter = 0; iter < burnin + iterations; ++iter) {
    // coefficients | rest
    la::Matrix prec(3, std::vector<double>(3, 0.0));
    std::vector<double> rhs(3, 0.0);
    for (int a = 0; a < 3; ++a) {
      prec[a][a] = 1.0 / prior.var[a];
      rhs[a] = prior.mean[a] / prior.var[a];
      for (int b = 0; b < 3; ++b) prec[a][b] += xtx[a][b] / sig_eps2;
    }
    for (int i = 0; i < n; ++i) {
      auto x = row(i);
      double resid = data.y[i] - re[data.subject[i]];
      for (int a = 0; a < 3; ++a) rhs[a] += x[a] * resid / sig_eps2;
    }
    la::Matrix lower = la::chol_lower(prec);
    std::vector<double> mean = la::chol_solve(lower, rhs);
    std::vector<double> z = {rs.normal(), rs.normal(), rs.normal()};
    std::vector<double> draw = la::mvn_from_precision(lower, mean, z);
    beta = {draw[0], draw[1], draw[2]};

    // subject effects | rest
    std::vector<double> resid_sum(data.subjects, 0.0);
    for (int i = 0; i < n; ++i) {
      auto x = row(i);
      double fixed = beta[0] * x[0] + beta[1] * x[1] + beta[2] * x[2];
      resid_sum[data.subject[i]] += data.y[i] - fixed;
    }
    for (int s = 0; s < data.subjects; ++s) {
      double prec_s = 1.0 / sig_re2 + per_subject[s] / sig_eps2;
      double mean_s = (resid_sum[s] / sig_eps2) / prec_s;
      re[s] = mean_s + rs.normal() / std::sqrt(prec_s);
    }

    // variances | rest
    double ss_re = 0.0;
    for (double g : re) ss_re += g * g;
    sig_re2 = rs.inverse_gamma(prior.ig_shape + 0.5 * data.subjects, prior.ig_scale + 0.5 * ss_re);
    double ss_eps = 0.0;
    for (int i = 0; i < n; ++i) {
      auto x = row(i);
      double fitval = beta[0] * x[0] + beta[1] * x[1] + beta[2] * x[2] + re[data.subject[i]];
      double r = data.y[i] - fitval;
      ss_eps += r * r;
    }
    sig_eps2 = rs.inverse_gamma(prior.ig_shape + 0.5 * n, prior.ig_scale + 0.5 * ss_eps);

    if (iter >= burnin) {
      fit.beta_draws.push_back(beta);
      for (int a = 0; a < 3; ++a) fit.beta[a] += beta[a];
      fit.sigma_subject2 += sig_re2;
      fit.sigma_noise2 += sig_eps2;
    }
  }
  for (int a = 0; a < 3; ++a) fit.beta[a] /= iterations;
  fit.sigma_subject2 /= iterations;
  fit.sigma_noise2 /= iterations;
  return fit;
}

}  // namespace escalate::gibbs
