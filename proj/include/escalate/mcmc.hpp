#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace escalate::mcmc {

struct Chain {
  std::vector<std::vector<double>> draws;  // post burn-in, thinned
  std::vector<double> mean;
  double accept_rate = 0.0;

  double mean_of(int dim) const { return mean.at(dim); }
};

/// Component-wise random-walk Metropolis with Robbins-Monro scale
/// adaptation during burn-in (target acceptance 0.44 per coordinate).
/// Fully deterministic for a given key.
Chain sample(const std::function<double(const std::vector<double>&)>& log_density,
             std::vector<double> init, std::vector<double> init_scale, std::uint64_t key, int burnin,
             int iterations, int thin = 1);

}  // namespace escalate::mcmc
