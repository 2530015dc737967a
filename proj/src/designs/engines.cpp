#include <cmath>
#include <limits>
#include <stdexcept>

#include "engines_internal.hpp"
#include "escalate/stats.hpp"

namespace escalate {

const char* to_string(DesignKind k) {
  switch (k) {
    case DesignKind::kTiteCrm: return "tite-crm";
    case DesignKind::kTiteCrm2: return "tite-crm2";
    case DesignKind::kIcsdp: return "icsdp";
    case DesignKind::kPomm: return "pomm";
    case DesignKind::kNttp: return "nttp";
    case DesignKind::kTiteBoin: return "tite-boin";
    case DesignKind::kTiteMtpi2: return "tite-mtpi2";
    case DesignKind::kRollingMtpi2: return "r-mtpi2";
  }
  return "?";
}

std::optional<DesignKind> design_from_string(const std::string& name) {
  for (DesignKind k : all_design_kinds())
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::vector<DesignKind> all_design_kinds() {
  return {DesignKind::kTiteCrm,  DesignKind::kTiteCrm2, DesignKind::kIcsdp,
          DesignKind::kPomm,     DesignKind::kNttp,     DesignKind::kTiteBoin,
          DesignKind::kTiteMtpi2, DesignKind::kRollingMtpi2};
}

DesignSettings DesignSettings::defaults(int setting) {
  if (setting != 1 && setting != 2) throw std::invalid_argument("setting must be 1 or 2");
  DesignSettings s;
  if (setting == 2) {
    s.icsdp.pi_star_J = 0.3;
    s.icsdp.n0 = 4.0;
    s.nttp.prior_mean = {0.05, 0.1, 0.0};
    s.nttp.prior_var = {10.0, 10.0, 10.0};
    s.boin.prior_alpha = 1.0;
    s.boin.prior_beta = 1.0;
  }
  return s;
}

double Design::prob_cycle1_above(const TrialState& state, const DesignContext&, int level,
                                 double tau1) const {
  int n = 0, m = 0;
  for (const auto& p : state.patients) {
    if (p.dose_level != level || p.cycles_observed() < 1) continue;
    ++n;
    m += p.outcomes[0].dlt ? 1 : 0;
  }
  return stats::beta_tail(1.0 + m, 1.0 + n - m, tau1);
}

std::unique_ptr<Design> make_design(DesignKind kind, const DesignSettings& settings) {
  switch (kind) {
    case DesignKind::kTiteCrm: return detail::make_tite_crm(settings.crm);
    case DesignKind::kTiteCrm2: return detail::make_tite_crm2(settings.crm2);
    case DesignKind::kIcsdp: return detail::make_icsdp(settings.icsdp);
    case DesignKind::kPomm: return detail::make_pomm(settings.pomm);
    case DesignKind::kNttp: return detail::make_nttp(settings.nttp);
    case DesignKind::kTiteBoin: return detail::make_tite_boin(settings.boin);
    case DesignKind::kTiteMtpi2: return detail::make_tite_mtpi2(settings.mtpi2);
    case DesignKind::kRollingMtpi2:
      return detail::make_rolling_mtpi2(settings.mtpi2, settings.rolling_consecutive_cap);
  }
  throw std::invalid_argument("unknown design kind");
}

double mtd_cv(const std::vector<double>& draws) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (draws.empty()) return inf;
  for (double d : draws)
    if (!std::isfinite(d)) return inf;
  double med = stats::median(draws);
  if (med <= 0.0) return inf;
  return 1.4826 * stats::mad(draws) / med;
}

namespace detail {

bool any_dlt(const TrialState& state) {
  for (const auto& p : state.patients)
    if (p.off_study) return true;
  return false;
}

int top_allowed(const TrialState& state, int levels) {
  for (int j = levels - 1; j >= 0; --j)
    if (!state.excluded(j)) return j;
  return -1;
}

int argmin_gap(const std::vector<double>& value, double target, const TrialState& state) {
  int best = -1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(value.size()); ++j) {
    if (state.excluded(j)) continue;
    double gap = std::fabs(value[j] - target);
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      best = j;
    }
  }
  return best;
}

int step_level(const TrialState& state, Action action, int levels) {
  int cur = std::min(state.current_dose, top_allowed(state, levels));
  if (cur < 0) return -1;
  if (action == Action::kEscalate) {
    int next = cur + 1;
    if (next < levels && !state.excluded(next)) return next;
    return cur;
  }
  if (action == Action::kDeescalate) return std::max(0, cur - 1);
  return cur;
}

la::Matrix curvature_chol(const opt::Objective& f, const std::vector<double>& x) {
  la::Matrix h = opt::numeric_hessian(f, x, 1e-4);
  double ridge = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    la::Matrix trial = h;
    for (std::size_t i = 0; i < trial.size(); ++i) trial[i][i] += ridge;
    try {
      return la::chol_lower(trial);
    } catch (const std::runtime_error&) {
      ridge = ridge == 0.0 ? 1e-8 : ridge * 100.0;
    }
  }
  throw std::runtime_error("curvature matrix remained indefinite");
}

namespace {

// Whole-period completion counts per dose for the isotonic final selection.
std::vector<std::pair<int, int>> complete_counts(const TrialState& state, int levels, int cycles) {
  std::vector<std::pair<int, int>> nm(levels, {0, 0});
  for (const auto& p : state.patients) {
    if (p.off_study) {
      nm[p.dose_level].first++;
      nm[p.dose_level].second++;
    } else if (p.cycles_observed() >= cycles) {
      nm[p.dose_level].first++;
    }
  }
  return nm;
}

class IntervalDesignBase : public Design {
 public:
  explicit IntervalDesignBase(const IntervalConfig& cfg) : cfg_(cfg) {}

  std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const override {
    auto nm = complete_counts(state, ctx.grid->levels(), ctx.cfg->cycles);
    int level = assisted_final_mtd(nm, cfg_, ctx.cfg->tau, state.excluded_doses);
    if (level < 0) return std::nullopt;
    return level;
  }

  bool model_based() const override { return false; }

 protected:
  DoseDecision move(const TrialState& state, const DesignContext& ctx, Action action) const {
    int level = step_level(state, action, ctx.grid->levels());
    if (level < 0) return DoseDecision::stop({StopReason::kHardSafety});
    if (action == Action::kStay && level == state.current_dose) return DoseDecision::stay();
    return DoseDecision::assign(level);
  }

  IntervalConfig cfg_;
};

class TiteBoinDesign final : public IntervalDesignBase {
 public:
  using IntervalDesignBase::IntervalDesignBase;
  std::string name() const override { return "tite-boin"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    if (state.patients.empty()) return DoseDecision::assign(0);
    auto snap = snapshot_at(state, state.current_dose, ctx.cfg->cycles);
    auto bounds = boin_boundaries(cfg_.tau1, cfg_.tau2, ctx.cfg->tau);
    return move(state, ctx, tite_boin_decide(snap, bounds));
  }
};

class TiteMtpi2Design final : public IntervalDesignBase {
 public:
  using IntervalDesignBase::IntervalDesignBase;
  std::string name() const override { return "tite-mtpi2"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    if (state.patients.empty()) return DoseDecision::assign(0);
    auto snap = snapshot_at(state, state.current_dose, ctx.cfg->cycles);
    return move(state, ctx, keyboard_decide(snap, cfg_));
  }
};

class RollingMtpi2Design final : public IntervalDesignBase {
 public:
  RollingMtpi2Design(const IntervalConfig& cfg, int cap) : IntervalDesignBase(cfg), cap_(cap) {}
  std::string name() const override { return "r-mtpi2"; }

  DoseDecision propose(const TrialState& state, const DesignContext& ctx) const override {
    if (state.patients.empty()) return DoseDecision::assign(0);
    auto snap = snapshot_at(state, state.current_dose, ctx.cfg->cycles);
    auto rd = rmtpi2_decide(snap, cfg_, state.consecutive_at_current, cap_);
    if (rd.hold) return DoseDecision::stay();
    return move(state, ctx, rd.action);
  }

 private:
  int cap_;
};

}  // namespace

std::unique_ptr<Design> make_tite_boin(const IntervalConfig& cfg) {
  return std::make_unique<TiteBoinDesign>(cfg);
}
std::unique_ptr<Design> make_tite_mtpi2(const IntervalConfig& cfg) {
  return std::make_unique<TiteMtpi2Design>(cfg);
}
std::unique_ptr<Design> make_rolling_mtpi2(const IntervalConfig& cfg, int consecutive_cap) {
  return std::make_unique<RollingMtpi2Design>(cfg, consecutive_cap);
}

}  // namespace detail
}  // namespace escalate
