#include <cmath>
#include <limits>
#include <stdexcept>

#include "engines_internal.hpp"
#include "escalate/optim.hpp"
#include "escalate/rng.hpp"
#include "escalate/stats.hpp"

namespace escalate {

void IcsdpConfig::validate() const {
  if (!(pi_star_1 > 0.0 && pi_star_1 <= pi_star_J && pi_star_J < 1.0))
    throw std::invalid_argument("need 0 < pi_star_1 <= pi_star_J < 1");
  if (n0 <= 0.0) throw std::invalid_argument("n0 must be positive");
  if (!(cycle_decay > 0.0 && cycle_decay <= 1.0))
    throw std::invalid_argument("cycle_decay must be in (0,1]");
}

namespace {

constexpr double kBigNll = 1e300;

// negative log likelihood of the complementary-log-log model on (r, q)
// counts; params = (gamma_1..gamma_S, theta)
double icsdp_nll(const std::vector<double>& phi, const CycleCountTable& counts,
                 const std::vector<double>& log_dose, int cycles) {
  double total = 0.0;
  int levels = static_cast<int>(log_dose.size());
  for (int j = 0; j < levels; ++j) {
    for (int s = 0; s < cycles; ++s) {
      double r = counts.r[j][s], q = counts.q[j][s];
      if (r == 0.0 && q == 0.0) continue;
      double eta = phi[s] + phi[cycles] * log_dose[j];
      double ee = std::exp(eta);
      double pi = -std::expm1(-ee);
      if (r > 0.0) {
        if (pi <= 0.0) return kBigNll;
        total -= r * std::log(pi);
      }
      total += q * ee;  // -q log(1-pi) = q e^eta
    }
  }
  return std::isfinite(total) ? total : kBigNll;
}

std::vector<double> icsdp_grad(const std::vector<double>& phi, const CycleCountTable& counts,
                               const std::vector<double>& log_dose, int cycles) {
  std::vector<double> g(cycles + 1, 0.0);
  int levels = static_cast<int>(log_dose.size());
  for (int j = 0; j < levels; ++j) {
    for (int s = 0; s < cycles; ++s) {
      double r = counts.r[j][s], q = counts.q[j][s];
      if (r == 0.0 && q == 0.0) continue;
      double eta = phi[s] + phi[cycles] * log_dose[j];
      double ee = std::exp(eta);
      double pi = -std::expm1(-ee);
      double dpi = ee * std::exp(-ee);
      double deta = q * ee;
      if (r > 0.0 && pi > 0.0) deta -= r * dpi / pi;
      g[s] += deta;
      g[cycles] += deta * log_dose[j];
    }
  }
  return g;
}

CycleCountTable with_pseudo(const CycleCountTable& observed, const DoseGrid& grid, int cycles,
                            const IcsdpConfig& cfg) {
  CycleCountTable totals = observed;
  int top = grid.levels() - 1;
  const std::pair<int, double> anchors[2] = {{0, cfg.pi_star_1}, {top, cfg.pi_star_J}};
  for (auto [j, pi] : anchors) {
    double at_risk = cfg.n0;
    for (int s = 0; s < cycles; ++s) {
      double rate = pi * std::pow(cfg.cycle_decay, s);
      double r = at_risk * rate;
      totals.r[j][s] += r;
      totals.q[j][s] += at_risk - r;
      at_risk -= r;
    }
  }
  return totals;
}

}  // namespace

IcsdpFit icsdp_fit(const CycleCountTable& observed, const DoseGrid& grid, int cycles,
                   const IcsdpConfig& cfg) {
  cfg.validate();
  CycleCountTable counts = with_pseudo(observed, grid, cycles, cfg);
  std::vector<double> log_dose(grid.levels());
  for (int j = 0; j < grid.levels(); ++j) log_dose[j] = std::log(grid[j]);

  auto nll = [&](const std::vector<double>& phi) { return icsdp_nll(phi, counts, log_dose, cycles); };

  // start near the pseudo-data anchor rates with unit dose slope
  std::vector<double> phi(cycles + 1, 0.0);
  phi[cycles] = 1.0;
  double mid_log_dose = 0.5 * (log_dose.front() + log_dose.back());
  for (int s = 0; s < cycles; ++s) {
    double rate = 0.5 * (cfg.pi_star_1 + cfg.pi_star_J) * std::pow(cfg.cycle_decay, s);
    phi[s] = std::log(-std::log1p(-rate)) - mid_log_dose;
  }

  double value = nll(phi);
  bool newton_ok = true;
  for (int iter = 0; iter < 200; ++iter) {
    auto g = icsdp_grad(phi, counts, log_dose, cycles);
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::fabs(v));
    if (gmax < 1e-9) break;
    std::vector<double> step;
    try {
      la::Matrix h = opt::numeric_hessian(nll, phi, 1e-4);
      step = la::chol_solve(la::chol_lower(h), g);
    } catch (const std::runtime_error&) {
      newton_ok = false;
      break;
    }
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      std::vector<double> cand = phi;
      for (std::size_t i = 0; i < cand.size(); ++i) cand[i] -= t * step[i];
      double v = nll(cand);
      if (v < value) {
        phi = std::move(cand);
        value = v;
        improved = true;
        break;
      }
    }
    if (!improved) {
      newton_ok = false;
      break;
    }
  }
  if (!newton_ok) {
    auto nm = opt::nelder_mead(nll, phi, 0.25, 40000, 1e-12);
    phi = nm.x;
  }

  IcsdpFit fit;
  fit.gamma.assign(phi.begin(), phi.begin() + cycles);
  fit.theta = phi[cycles];
  fit.pi.assign(grid.levels(), std::vector<double>(cycles, 0.0));
  fit.rho.assign(grid.levels(), 0.0);
  for (int j = 0; j < grid.levels(); ++j) {
    double hazard_sum = 0.0;
    for (int s = 0; s < cycles; ++s) {
      double ee = std::exp(fit.gamma[s] + fit.theta * log_dose[j]);
      fit.pi[j][s] = -std::expm1(-ee);
      hazard_sum += ee;
    }
    fit.rho[j] = -std::expm1(-hazard_sum);
  }
  fit.hessian_lower = detail::curvature_chol(nll, phi);
  return fit;
}

namespace detail {
namespace {

class IcsdpDesign final : public Design {
 public:
  explicit IcsdpDesign(const IcsdpConfig& cfg) : cfg_(cfg) {}
  std::string name() const override { return "icsdp"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    int levels = ctx.grid->levels();
    if (top_allowed(state, levels) < 0) return DoseDecision::stop({StopReason::kHardSafety});
    if (state.patients.empty()) return DoseDecision::assign(0);
    auto fit = refit(state, ctx);
    double risk_total = 0.0;
    for (double r : fit.rho) risk_total += r;
    if (risk_total < 1e-12) return DoseDecision::assign(0);  // degenerate: fall to the lowest dose
    int level = argmin_gap(fit.rho, ctx.cfg->tau, state);
    if (level < 0) return DoseDecision::stop({StopReason::kHardSafety});
    return DoseDecision::assign(level);
  }

  std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const override {
    auto fit = refit(state, ctx);
    int level = argmin_gap(fit.rho, ctx.cfg->tau, state);
    if (level < 0) return std::nullopt;
    return level;
  }

  double prob_cycle1_above(const TrialState& state, const DesignContext& ctx, int level,
                           double tau1) const override {
    auto fit = refit(state, ctx);
    double ld = std::log((*ctx.grid)[level]);
    double eta = fit.gamma[0] + fit.theta * ld;
    // Laplace: variance of eta_1 from the Hessian at the optimum
    std::vector<double> g(fit.gamma.size() + 1, 0.0);
    g[0] = 1.0;
    g.back() = ld;
    auto hinv_g = la::chol_solve(fit.hessian_lower, g);
    double var = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) var += g[i] * hinv_g[i];
    double se = std::sqrt(std::max(var, 1e-300));
    double cut = std::log(-std::log1p(-tau1));
    return stats::normal_cdf((eta - cut) / se);
  }

  std::vector<double> mtd_draws(const TrialState& state, const DesignContext& ctx) const override {
    auto fit = refit(state, ctx);
    int cycles = ctx.cfg->cycles;
    std::vector<double> mean(fit.gamma);
    mean.push_back(fit.theta);
    const int k_draws = 400;
    rng::Stream stream(rng::hash_key(ctx.fit_key, 3));
    std::vector<double> out;
    out.reserve(k_draws);
    double target_hazard = -std::log1p(-ctx.cfg->tau);
    for (int k = 0; k < k_draws; ++k) {
      std::vector<double> z(mean.size());
      for (auto& v : z) v = stream.normal();
      auto draw = la::mvn_from_precision(fit.hessian_lower, mean, z);
      double theta = draw[cycles];
      if (std::fabs(theta) < 1e-10) {
        out.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double base = 0.0;
      for (int s = 0; s < cycles; ++s) base += std::exp(draw[s]);
      out.push_back(std::pow(target_hazard / base, 1.0 / theta));
    }
    return out;
  }

 private:
  IcsdpFit refit(const TrialState& state, const DesignContext& ctx) const {
    auto observed = count_table(state, ctx.grid->levels(), ctx.cfg->cycles);
    return icsdp_fit(observed, *ctx.grid, ctx.cfg->cycles, cfg_);
  }

  IcsdpConfig cfg_;
};

}  // namespace

std::unique_ptr<Design> make_icsdp(const IcsdpConfig& cfg) {
  return std::make_unique<IcsdpDesign>(cfg);
}

}  // namespace detail
}  // namespace escalate
