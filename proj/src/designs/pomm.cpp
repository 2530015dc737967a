#include <cmath>
#include <limits>
#include <stdexcept>

#include "engines_internal.hpp"
#include "escalate/quadrature.hpp"
#include "escalate/rng.hpp"
#include "escalate/stats.hpp"

namespace escalate {

void PommConfig::validate(int levels) const {
  if (static_cast<int>(p1_star.size()) != levels)
    throw std::invalid_argument("p1_star length must match dose levels");
  double prev = 0.0;
  for (double p : p1_star) {
    if (!(p > prev && p < 1.0)) throw std::invalid_argument("p1_star must be increasing in (0,1)");
    prev = p;
  }
  if (grade2_ratio.empty()) throw std::invalid_argument("grade2_ratio must be non-empty");
  for (double r : grade2_ratio)
    if (r <= 0.0) throw std::invalid_argument("grade2_ratio entries must be positive");
  for (int j = 0; j < levels; ++j) {
    double ratio = grade2_ratio[std::min<std::size_t>(j, grade2_ratio.size() - 1)];
    if (p1_star[j] * (1.0 + ratio) >= 1.0)
      throw std::invalid_argument("pseudo category probabilities exceed 1");
  }
  if (n0 <= 0.0) throw std::invalid_argument("n0 must be positive");
  if (switch_n < 1) throw std::invalid_argument("switch_n must be positive");
}

namespace {

// later-cycle pseudo rates fall off like the assumed conditional hazards
constexpr double kPseudoDecay = 1.0 / 3.0;

int category_of(const CycleOutcome& o) {
  if (o.max_grade >= 3) return 3;
  return o.max_grade == 2 ? 2 : 1;
}

struct CatProbs {
  double p1, p2, p3;
};

CatProbs category_probs(double alpha1, double alpha2, double b1, double b2, double dose, int cycle,
                        double u) {
  double lin = b1 * dose + b2 * cycle + u;
  double c1 = stats::expit(alpha1 - lin);
  double c2 = stats::expit(alpha2 - lin);
  return {c1, c2 - c1, 1.0 - c2};
}

double pick(const CatProbs& p, int category) {
  double v = category == 1 ? p.p1 : category == 2 ? p.p2 : p.p3;
  return std::max(v, 1e-300);
}

double pseudo_ratio(const PommConfig& cfg, int level) {
  return cfg.grade2_ratio[std::min<std::size_t>(level, cfg.grade2_ratio.size() - 1)];
}

// Objective shared by the fit and the curvature pass; captures by value.
opt::Objective pomm_po_nll(PommData data, PommConfig cfg, DoseGrid grid, int cycles) {
  return [data = std::move(data), cfg = std::move(cfg), grid = std::move(grid),
          cycles](const std::vector<double>& ps) {
    static const quad::GaussHermite gh = quad::gauss_hermite(15);
    static const double sqrt2 = std::sqrt(2.0);
    static const double inv_sqrt_pi = 1.0 / std::sqrt(std::acos(-1.0));
    double alpha1 = ps[0], alpha2 = ps[0] + std::exp(ps[1]);
    double b1 = ps[2], b2 = ps[3];
    double sigma0 = std::exp(ps[4]);
    double total = 0.0;
    for (std::size_t i = 0; i < data.subjects.size(); ++i) {
      double lik = 0.0;
      for (std::size_t q = 0; q < gh.node.size(); ++q) {
        double u = sqrt2 * sigma0 * gh.node[q];
        double prod = 1.0;
        for (auto [cycle, cat] : data.subjects[i])
          prod *= pick(category_probs(alpha1, alpha2, b1, b2, data.dose[i], cycle, u), cat);
        lik += gh.weight[q] * prod;
      }
      lik *= inv_sqrt_pi;
      if (!(lik > 0.0)) return 1e300;
      total -= std::log(lik);
    }
    // pseudo-observations at u = 0; weight n0 per dose split across cycles
    double w = cfg.n0 / cycles;
    for (int j = 0; j < grid.levels(); ++j) {
      double ratio = pseudo_ratio(cfg, j);
      for (int s = 1; s <= cycles; ++s) {
        double decay = std::pow(kPseudoDecay, s - 1);
        double t3 = cfg.p1_star[j] * decay;
        double t2 = ratio * cfg.p1_star[j] * decay;
        double t1 = 1.0 - t2 - t3;
        CatProbs p = category_probs(alpha1, alpha2, b1, b2, grid[j], s, 0.0);
        total -=
            w * (t1 * std::log(pick(p, 1)) + t2 * std::log(pick(p, 2)) + t3 * std::log(pick(p, 3)));
      }
    }
    // weak ridge keeps the optimum finite when some category is never seen
    total += 0.5 * (ps[0] * ps[0] + ps[1] * ps[1] + ps[2] * ps[2] + ps[3] * ps[3]) / 100.0;
    total += 0.5 * ps[4] * ps[4];
    return std::isfinite(total) ? total : 1e300;
  };
}

}  // namespace

PommData pomm_data(const TrialState& state, const DoseGrid& grid) {
  PommData data;
  for (const auto& p : state.patients) {
    if (p.cycles_observed() < 1) continue;
    std::vector<std::pair<int, int>> rows;
    for (int s = 0; s < p.cycles_observed(); ++s) rows.push_back({s + 1, category_of(p.outcomes[s])});
    data.subjects.push_back(std::move(rows));
    data.dose.push_back(grid[p.dose_level]);
  }
  return data;
}

PommPoFit pomm_po_fit(const PommData& data, const PommConfig& cfg, const DoseGrid& grid, int cycles) {
  auto nll = pomm_po_nll(data, cfg, grid, cycles);
  std::vector<double> init = {1.0, 0.0, 0.3, 0.3, -0.5};
  auto result = opt::nelder_mead(nll, init, 0.5, 40000, 1e-10);
  for (int attempt = 0; attempt < 2 && !result.converged; ++attempt)
    result = opt::nelder_mead(nll, result.x, 0.1, 40000, 1e-10);

  PommPoFit fit;
  fit.params = result.x;
  fit.ok = result.converged && result.value < 1e299;
  return fit;
}

double pomm_po_p3(const std::vector<double>& params, double dose, int cycle) {
  double alpha2 = params[0] + std::exp(params[1]);
  return 1.0 - stats::expit(alpha2 - params[2] * dose - params[3] * cycle);
}

Logistic2Fit logistic2_fit(const std::vector<std::array<double, 3>>& rows) {
  Logistic2Fit fit;
  double b0 = 0.0, b1 = 0.0;
  auto nll = [&rows](double c0, double c1) {
    double total = 0.0;
    for (const auto& r : rows) {
      double p = stats::expit(c0 + c1 * r[0]);
      p = std::min(std::max(p, 1e-300), 1.0 - 1e-16);
      total -= r[2] * (r[1] * std::log(p) + (1.0 - r[1]) * std::log1p(-p));
    }
    return total;
  };
  double value = nll(b0, b1);
  for (int iter = 0; iter < 100; ++iter) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (const auto& r : rows) {
      double p = stats::expit(b0 + b1 * r[0]);
      double res = r[2] * (p - r[1]);
      g0 += res;
      g1 += res * r[0];
      double v = r[2] * p * (1.0 - p);
      h00 += v;
      h01 += v * r[0];
      h11 += v * r[0] * r[0];
    }
    if (std::fabs(g0) < 1e-10 && std::fabs(g1) < 1e-10) {
      fit.ok = true;
      break;
    }
    double det = h00 * h11 - h01 * h01;
    if (!(det > 1e-12)) break;
    double s0 = (h11 * g0 - h01 * g1) / det;
    double s1 = (h00 * g1 - h01 * g0) / det;
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      double v = nll(b0 - t * s0, b1 - t * s1);
      if (v < value + 1e-15) {
        b0 -= t * s0;
        b1 -= t * s1;
        value = v;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  fit.b0 = b0;
  fit.b1 = b1;
  if (fit.ok) {
    la::Matrix h(2, std::vector<double>(2, 0.0));
    for (const auto& r : rows) {
      double p = stats::expit(b0 + b1 * r[0]);
      double v = r[2] * p * (1.0 - p);
      h[0][0] += v;
      h[0][1] += v * r[0];
      h[1][0] += v * r[0];
      h[1][1] += v * r[0] * r[0];
    }
    try {
      fit.hessian_lower = la::chol_lower(h);
    } catch (const std::runtime_error&) {
      fit.ok = false;
    }
  }
  return fit;
}

namespace detail {
namespace {

double solve_whole_period(const std::vector<double>& params, int cycles, double tau) {
  auto whole = [&](double dose) {
    double surv = 1.0;
    for (int s = 1; s <= cycles; ++s) surv *= 1.0 - pomm_po_p3(params, dose, s);
    return 1.0 - surv;
  };
  double lo = 1e-3, hi = 1e3;
  double flo = whole(lo) - tau, fhi = whole(hi) - tau;
  if (flo * fhi >= 0.0) return std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < 100; ++it) {
    double mid = std::sqrt(lo * hi);
    if ((whole(mid) - tau) * flo <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return std::sqrt(lo * hi);
}

class PommDesign final : public Design {
 public:
  explicit PommDesign(const PommConfig& cfg) : cfg_(cfg) {}
  std::string name() const override { return "pomm"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    int levels = ctx.grid->levels();
    cfg_.validate(levels);
    if (top_allowed(state, levels) < 0) return DoseDecision::stop({StopReason::kHardSafety});
    if (state.patients.empty()) return DoseDecision::assign(0);
    int level = select(state, ctx);
    if (level == kNoFit) return DoseDecision::assign(state.current_dose);  // fit failure: hold
    if (level < 0) return DoseDecision::stop({StopReason::kHardSafety});
    return DoseDecision::assign(level);
  }

  std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const override {
    int level = select(state, ctx);
    if (level == kNoFit && !state.excluded(state.current_dose)) return state.current_dose;
    if (level < 0) return std::nullopt;
    return level;
  }

  double prob_cycle1_above(const TrialState& state, const DesignContext& ctx, int level,
                           double tau1) const override {
    auto fit = cycle1_fit(state, ctx);
    if (!fit.ok) return Design::prob_cycle1_above(state, ctx, level, tau1);
    double d = (*ctx.grid)[level];
    std::vector<double> g = {1.0, d};
    auto hinv_g = la::chol_solve(fit.hessian_lower, g);
    double var = g[0] * hinv_g[0] + g[1] * hinv_g[1];
    double se = std::sqrt(std::max(var, 1e-300));
    double eta = fit.b0 + fit.b1 * d;
    return stats::normal_cdf((eta - stats::logit(tau1)) / se);
  }

  std::vector<double> mtd_draws(const TrialState& state, const DesignContext& ctx) const override {
    const int k_draws = 400;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> out;
    if (use_ordinal(state)) {
      auto data = pomm_data(state, *ctx.grid);
      auto fit = pomm_po_fit(data, cfg_, *ctx.grid, ctx.cfg->cycles);
      if (fit.ok) {
        auto nll = pomm_po_nll_for(data, ctx);
        la::Matrix lower;
        try {
          lower = curvature_chol(nll, fit.params);
        } catch (const std::runtime_error&) {
          return out;
        }
        rng::Stream stream(rng::hash_key(ctx.fit_key, 4));
        out.reserve(k_draws);
        for (int k = 0; k < k_draws; ++k) {
          std::vector<double> z(fit.params.size());
          for (auto& v : z) v = stream.normal();
          auto draw = la::mvn_from_precision(lower, fit.params, z);
          out.push_back(solve_whole_period(draw, ctx.cfg->cycles, ctx.cfg->tau));
        }
        return out;
      }
    }
    auto fit = cycle1_fit(state, ctx);
    if (!fit.ok) return out;
    rng::Stream stream(rng::hash_key(ctx.fit_key, 4));
    double cut = stats::logit(ctx.cfg->tau_cycle1);
    out.reserve(k_draws);
    for (int k = 0; k < k_draws; ++k) {
      std::vector<double> z = {stream.normal(), stream.normal()};
      auto draw = la::mvn_from_precision(fit.hessian_lower, {fit.b0, fit.b1}, z);
      out.push_back(std::fabs(draw[1]) < 1e-12 ? nan : (cut - draw[0]) / draw[1]);
    }
    return out;
  }

 private:
  static constexpr int kNoFit = -2;

  bool use_ordinal(const TrialState& state) const { return state.enrolled() > cfg_.switch_n; }

  opt::Objective pomm_po_nll_for(const PommData& data, const DesignContext& ctx) const {
    return pomm_po_nll(data, cfg_, *ctx.grid, ctx.cfg->cycles);
  }

  // level, or -1 when everything is excluded, or kNoFit when no model fits
  int select(const TrialState& state, const DesignContext& ctx) const {
    if (use_ordinal(state)) {
      auto data = pomm_data(state, *ctx.grid);
      auto fit = pomm_po_fit(data, cfg_, *ctx.grid, ctx.cfg->cycles);
      if (fit.ok) {
        std::vector<double> whole(ctx.grid->levels());
        for (int j = 0; j < ctx.grid->levels(); ++j) {
          double surv = 1.0;
          for (int s = 1; s <= ctx.cfg->cycles; ++s)
            surv *= 1.0 - pomm_po_p3(fit.params, (*ctx.grid)[j], s);
          whole[j] = 1.0 - surv;
        }
        return argmin_gap(whole, ctx.cfg->tau, state);
      }
    }
    auto fit = cycle1_fit(state, ctx);
    if (!fit.ok) return kNoFit;
    std::vector<double> risk(ctx.grid->levels());
    for (int j = 0; j < ctx.grid->levels(); ++j)
      risk[j] = stats::expit(fit.b0 + fit.b1 * (*ctx.grid)[j]);
    return argmin_gap(risk, ctx.cfg->tau_cycle1, state);
  }

  Logistic2Fit cycle1_fit(const TrialState& state, const DesignContext& ctx) const {
    std::vector<std::array<double, 3>> rows;
    for (const auto& p : state.patients) {
      if (p.cycles_observed() < 1) continue;
      rows.push_back({(*ctx.grid)[p.dose_level], p.outcomes[0].dlt ? 1.0 : 0.0, 1.0});
    }
    for (int j = 0; j < ctx.grid->levels(); ++j) {
      rows.push_back({(*ctx.grid)[j], 1.0, cfg_.n0 * cfg_.p1_star[j]});
      rows.push_back({(*ctx.grid)[j], 0.0, cfg_.n0 * (1.0 - cfg_.p1_star[j])});
    }
    return logistic2_fit(rows);
  }

  PommConfig cfg_;
};

}  // namespace

std::unique_ptr<Design> make_pomm(const PommConfig& cfg) { return std::make_unique<PommDesign>(cfg); }

}  // namespace detail
}  // namespace escalate
