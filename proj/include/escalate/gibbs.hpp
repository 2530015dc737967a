#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace escalate::gibbs {

/// Longitudinal observations for the linear mixed model
/// y = b0 + b1 * dose + b2 * cycle + subject effect + noise.
struct LmmData {
  std::vector<double> y;
  std::vector<std::array<double, 2>> covariate;  // (dose, cycle) per row
  std::vector<int> subject;                      // 0-based subject index per row
  int subjects = 0;
};

struct LmmPrior {
  std::array<double, 3> mean{};
  std::array<double, 3> var{};
  double ig_shape = 0.001;  // for both variance components
  double ig_scale = 0.001;
};

struct LmmFit {
  std::array<double, 3> beta{};                    // posterior means
  std::vector<std::array<double, 3>> beta_draws;   // post burn-in
  double sigma_subject2 = 0.0;                     // posterior mean
  double sigma_noise2 = 0.0;
};

/// Blocked Gibbs sampler: coefficients jointly (3x3 Cholesky), then subject
/// effects, then the two variances from their inverse-gamma conditionals.
LmmFit fit_lmm(const LmmData& data, const LmmPrior& prior, std::uint64_t key, int burnin, int iterations);

}  // namespace escalate::gibbs
