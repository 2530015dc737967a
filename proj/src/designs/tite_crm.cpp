#include <cmath>
#include <stdexcept>

#include "engines_internal.hpp"
#include "escalate/mcmc.hpp"
#include "escalate/rng.hpp"
#include "escalate/stats.hpp"

namespace escalate {

void TiteCrmConfig::validate(int levels) const {
  if (static_cast<int>(skeleton.size()) != levels)
    throw std::invalid_argument("skeleton length must match dose levels");
  double prev = 0.0;
  for (double d : skeleton) {
    if (!(d > prev && d < 1.0)) throw std::invalid_argument("skeleton must be increasing in (0,1)");
    prev = d;
  }
  if (sigma2 <= 0.0) throw std::invalid_argument("sigma2 must be positive");
}

void TiteCrm2Config::validate() const {
  if (var_a0 <= 0.0 || var_loga1 <= 0.0) throw std::invalid_argument("prior variances must be positive");
  if (burnin < 1 || iterations < 1) throw std::invalid_argument("chain lengths must be positive");
}

std::vector<TiteObservation> tite_observations(const TrialState& state,
                                               const std::vector<double>& dose_value, int cycles,
                                               bool cycle1_only) {
  std::vector<TiteObservation> obs;
  for (const auto& p : state.patients) {
    int u = p.cycles_observed();
    if (u < 1) continue;
    double d = dose_value.at(p.dose_level);
    if (cycle1_only) {
      obs.push_back({d, 1.0, p.outcomes[0].dlt ? 1 : 0});
    } else if (p.off_study) {
      obs.push_back({d, 1.0, 1});
    } else {
      obs.push_back({d, std::min(1.0, static_cast<double>(u) / cycles), 0});
    }
  }
  return obs;
}

quad::Posterior1D titecrm_posterior(const std::vector<TiteObservation>& obs, double sigma2, int nodes) {
  auto log_density = [&](double beta) {
    double lp = -0.5 * beta * beta / sigma2;
    double eb = std::exp(beta);
    for (const auto& o : obs) {
      double log_f = eb * std::log(o.scaled_dose);
      if (o.y)
        lp += std::log(o.weight) + log_f;
      else
        lp += std::log1p(-o.weight * std::exp(log_f));
    }
    return lp;
  };
  return quad::posterior_1d(log_density, -kCrmSupport, kCrmSupport, nodes);
}

namespace detail {
namespace {

class TiteCrmDesign final : public Design {
 public:
  explicit TiteCrmDesign(const TiteCrmConfig& cfg) : cfg_(cfg) {}
  std::string name() const override { return "tite-crm"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    int levels = ctx.grid->levels();
    cfg_.validate(levels);
    if (top_allowed(state, levels) < 0) return DoseDecision::stop({StopReason::kHardSafety});
    if (state.patients.empty()) return DoseDecision::assign(0);
    if (!any_dlt(state)) {
      // start-up: one level per cycle until the first DLT
      return DoseDecision::assign(std::min(state.current_dose + 1, top_allowed(state, levels)));
    }
    int level = select(state, ctx);
    if (level < 0) return DoseDecision::stop({StopReason::kHardSafety});
    return DoseDecision::assign(level);
  }

  std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const override {
    int level = select(state, ctx);
    if (level < 0) return std::nullopt;
    return level;
  }

  double prob_cycle1_above(const TrialState& state, const DesignContext& ctx, int level,
                           double tau1) const override {
    auto obs = tite_observations(state, cfg_.skeleton, ctx.cfg->cycles, true);
    auto post = titecrm_posterior(obs, cfg_.sigma2, kCrmNodes);
    // risk decreases in beta; skeleton_j^{exp(beta)} > tau1 iff beta below the cut
    double cut = std::log(std::log(tau1) / std::log(cfg_.skeleton.at(level)));
    return post.mass_below(cut);
  }

  std::vector<double> mtd_draws(const TrialState& state, const DesignContext& ctx) const override {
    auto obs = tite_observations(state, cfg_.skeleton, ctx.cfg->cycles, false);
    auto post = titecrm_posterior(obs, cfg_.sigma2, kCrmNodes);
    const int k_draws = 400;
    std::vector<double> out;
    out.reserve(k_draws);
    for (int k = 0; k < k_draws; ++k) {
      double beta = post.icdf((k + 0.5) / k_draws);
      out.push_back(std::pow(ctx.cfg->tau, std::exp(-beta)));
    }
    return out;
  }

 private:
  int select(const TrialState& state, const DesignContext& ctx) const {
    auto obs = tite_observations(state, cfg_.skeleton, ctx.cfg->cycles, false);
    auto post = titecrm_posterior(obs, cfg_.sigma2, kCrmNodes);
    double slope = std::exp(post.mean());
    std::vector<double> risk(cfg_.skeleton.size());
    for (std::size_t j = 0; j < risk.size(); ++j) risk[j] = std::pow(cfg_.skeleton[j], slope);
    return argmin_gap(risk, ctx.cfg->tau, state);
  }

  TiteCrmConfig cfg_;
};

class TiteCrm2Design final : public Design {
 public:
  explicit TiteCrm2Design(const TiteCrm2Config& cfg) : cfg_(cfg) {}
  std::string name() const override { return "tite-crm2"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    int levels = ctx.grid->levels();
    cfg_.validate();
    if (top_allowed(state, levels) < 0) return DoseDecision::stop({StopReason::kHardSafety});
    if (state.patients.empty()) return DoseDecision::assign(0);
    if (!any_dlt(state))
      return DoseDecision::assign(std::min(state.current_dose + 1, top_allowed(state, levels)));
    try {
      int level = select(state, ctx);
      if (level < 0) return DoseDecision::stop({StopReason::kHardSafety});
      return DoseDecision::assign(level);
    } catch (const std::exception&) {
      return DoseDecision::assign(state.current_dose);  // sampler failure: hold the dose
    }
  }

  std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const override {
    try {
      int level = select(state, ctx);
      if (level < 0) return std::nullopt;
      return level;
    } catch (const std::exception&) {
      if (state.excluded(state.current_dose)) return std::nullopt;
      return state.current_dose;
    }
  }

  double prob_cycle1_above(const TrialState& state, const DesignContext& ctx, int level,
                           double tau1) const override {
    auto chain = fit(state, ctx, true);
    double d = (*ctx.grid)[level];
    double cut = stats::logit(tau1);
    int above = 0;
    for (const auto& th : chain.draws) above += (th[0] + std::exp(th[1]) * d > cut) ? 1 : 0;
    return static_cast<double>(above) / chain.draws.size();
  }

  std::vector<double> mtd_draws(const TrialState& state, const DesignContext& ctx) const override {
    auto chain = fit(state, ctx, false);
    double cut = stats::logit(ctx.cfg->tau);
    std::vector<double> out;
    out.reserve(chain.draws.size());
    for (const auto& th : chain.draws) out.push_back((cut - th[0]) / std::exp(th[1]));
    return out;
  }

 private:
  mcmc::Chain fit(const TrialState& state, const DesignContext& ctx, bool cycle1_only) const {
    auto obs = tite_observations(state, ctx.grid->values, ctx.cfg->cycles, cycle1_only);
    auto log_density = [this, obs](const std::vector<double>& th) {
      double a0 = th[0], log_a1 = th[1];
      double a1 = std::exp(log_a1);
      double lp = -0.5 * (a0 - cfg_.mu_a0) * (a0 - cfg_.mu_a0) / cfg_.var_a0 -
                  0.5 * (log_a1 - cfg_.mu_loga1) * (log_a1 - cfg_.mu_loga1) / cfg_.var_loga1;
      for (const auto& o : obs) {
        double g = o.weight * stats::expit(a0 + a1 * o.scaled_dose);
        lp += o.y ? std::log(g) : std::log1p(-g);
      }
      return lp;
    };
    std::uint64_t key = rng::hash_key(ctx.fit_key, cycle1_only ? 2 : 1);
    return mcmc::sample(log_density, {cfg_.mu_a0, cfg_.mu_loga1},
                        {0.5 * std::sqrt(cfg_.var_a0), 0.5 * std::sqrt(cfg_.var_loga1)}, key,
                        cfg_.burnin, cfg_.iterations);
  }

  int select(const TrialState& state, const DesignContext& ctx) const {
    auto chain = fit(state, ctx, false);
    double a0 = chain.mean_of(0);
    double a1 = 0.0;
    for (const auto& th : chain.draws) a1 += std::exp(th[1]);
    a1 /= chain.draws.size();
    std::vector<double> risk(ctx.grid->levels());
    for (int j = 0; j < ctx.grid->levels(); ++j) risk[j] = stats::expit(a0 + a1 * (*ctx.grid)[j]);
    return argmin_gap(risk, ctx.cfg->tau, state);
  }

  TiteCrm2Config cfg_;
};

}  // namespace

std::unique_ptr<Design> make_tite_crm(const TiteCrmConfig& cfg) {
  return std::make_unique<TiteCrmDesign>(cfg);
}
std::unique_ptr<Design> make_tite_crm2(const TiteCrm2Config& cfg) {
  return std::make_unique<TiteCrm2Design>(cfg);
}

}  // namespace detail
}  // namespace escalate
