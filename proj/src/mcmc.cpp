#include "escalate/mcmc.hpp"

#include <cmath>
#include <stdexcept>

#include "escalate/rng.hpp"

namespace escalate::mcmc {

Chain sample(const std::function<double(const std::vector<double>&)>& log_density,
             std::vector<double> init, std::vector<double> init_scale, std::uint64_t key, int burnin,
             int iterations, int thin) {
  const int dim = static_cast<int>(init.size());
  if (init_scale.size() != init.size()) throw std::invalid_argument("mcmc: scale size mismatch");
  if (iterations < 1 || thin < 1) throw std::invalid_argument("mcmc: bad iteration counts");

  rng::Stream rs(key);
  std::vector<double> x = std::move(init);
  double fx = log_density(x);
  if (!std::isfinite(fx)) throw std::invalid_argument("mcmc: initial point has zero density");

  std::vector<double> log_scale(dim);
  for (int d = 0; d < dim; ++d) {
    if (init_scale[d] <= 0.0) throw std::invalid_argument("mcmc: scales must be positive");
    log_scale[d] = std::log(init_scale[d]);
  }

  Chain out;
  out.draws.reserve(iterations / thin);
  out.mean.assign(dim, 0.0);
  long long accepted = 0, proposed = 0;

  for (int iter = 0; iter < burnin + iterations; ++iter) {
    for (int d = 0; d < dim; ++d) {
      double old = x[d];
      x[d] = old + std::exp(log_scale[d]) * rs.normal();
      double fy = log_density(x);
      bool accept = std::isfinite(fy) && std::log(rs.u01()) < fy - fx;
      if (accept)
        fx = fy;
      else
        x[d] = old;
      if (iter < burnin) {
        // Robbins-Monro drift toward 44% acceptance per coordinate
        double gain = 1.0 / std::sqrt(iter / 50 + 1.0);
        log_scale[d] += gain * ((accept ? 1.0 : 0.0) - 0.44) * 0.2;
      } else {
        accepted += accept;
        ++proposed;
      }
    }
    if (iter >= burnin && (iter - burnin) % thin == 0) {
      out.draws.push_back(x);
      for (int d = 0; d < dim; ++d) out.mean[d] += x[d];
    }
  }
  for (int d = 0; d < dim; ++d) out.mean[d] /= out.draws.size();
  out.accept_rate = proposed > 0 ? double(accepted) / double(proposed) : 0.0;
  return out;
}

}  // namespace escalate::mcmc
