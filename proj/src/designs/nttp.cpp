#include <cmath>
#include <limits>
#include <stdexcept>

#include "engines_internal.hpp"
#include "escalate/gibbs.hpp"
#include "escalate/rng.hpp"

namespace escalate {

void NttpConfig::validate() const {
  for (double v : prior_var)
    if (v <= 0.0) throw std::invalid_argument("prior variances must be positive");
  weights.validate();
  if (tau_nttp > 0.0 && tau_nttp >= 1.0) throw std::invalid_argument("tau_nttp must be in (0,1)");
  if (burnin < 1 || iterations < 1) throw std::invalid_argument("chain lengths must be positive");
}

namespace detail {
namespace {

class NttpDesign final : public Design {
 public:
  explicit NttpDesign(const NttpConfig& cfg) : cfg_(cfg) {}
  std::string name() const override { return "nttp"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    cfg_.validate();
    int levels = ctx.grid->levels();
    if (top_allowed(state, levels) < 0) return DoseDecision::stop({StopReason::kHardSafety});
    if (state.patients.empty()) return DoseDecision::assign(0);
    int level = select(state, ctx);
    if (level < 0) return DoseDecision::stop({StopReason::kHardSafety});
    return DoseDecision::assign(level);
  }

  std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const override {
    int level = select(state, ctx);
    if (level < 0) return std::nullopt;
    return level;
  }

  std::vector<double> mtd_draws(const TrialState& state, const DesignContext& ctx) const override {
    auto fit = refit(state, ctx);
    double target = target_score(ctx);
    std::vector<double> out;
    out.reserve(fit.beta_draws.size());
    for (const auto& b : fit.beta_draws) {
      if (std::fabs(b[1]) < 1e-12)
        out.push_back(std::numeric_limits<double>::quiet_NaN());
      else
        out.push_back((target - b[0] - b[2]) / b[1]);
    }
    return out;
  }

 private:
  double target_score(const DesignContext& ctx) const {
    return cfg_.tau_nttp > 0.0 ? cfg_.tau_nttp : expected_nttp_cycle1(ctx.cfg->tau_cycle1, cfg_.weights);
  }

  gibbs::LmmFit refit(const TrialState& state, const DesignContext& ctx) const {
    gibbs::LmmData data;
    int subject = 0;
    for (const auto& p : state.patients) {
      if (p.cycles_observed() < 1) continue;
      for (int s = 0; s < p.cycles_observed(); ++s) {
        data.y.push_back(nttp_value(p.outcomes[s].type_grades, cfg_.weights));
        data.covariate.push_back({(*ctx.grid)[p.dose_level], static_cast<double>(s + 1)});
        data.subject.push_back(subject);
      }
      ++subject;
    }
    data.subjects = subject;
    gibbs::LmmPrior prior;
    prior.mean = cfg_.prior_mean;
    prior.var = cfg_.prior_var;
    if (data.y.empty()) {
      // nothing observed yet: the prior is the posterior
      gibbs::LmmFit fit;
      fit.beta = cfg_.prior_mean;
      rng::Stream stream(rng::hash_key(ctx.fit_key, 1));
      fit.beta_draws.reserve(cfg_.iterations);
      for (int k = 0; k < cfg_.iterations; ++k) {
        std::array<double, 3> b;
        for (int i = 0; i < 3; ++i) b[i] = stream.normal(cfg_.prior_mean[i], std::sqrt(cfg_.prior_var[i]));
        fit.beta_draws.push_back(b);
      }
      return fit;
    }
    return gibbs::fit_lmm(data, prior, rng::hash_key(ctx.fit_key, 1), cfg_.burnin, cfg_.iterations);
  }

  int select(const TrialState& state, const DesignContext& ctx) const {
    auto fit = refit(state, ctx);
    double target = target_score(ctx);
    std::vector<double> predicted(ctx.grid->levels());
    for (int j = 0; j < ctx.grid->levels(); ++j)
      predicted[j] = fit.beta[0] + fit.beta[1] * (*ctx.grid)[j] + fit.beta[2];
    return argmin_gap(predicted, target, state);
  }

  NttpConfig cfg_;
};

}  // namespace

std::unique_ptr<Design> make_nttp(const NttpConfig& cfg) { return std::make_unique<NttpDesign>(cfg); }

}  // namespace detail
}  // namespace escalate
