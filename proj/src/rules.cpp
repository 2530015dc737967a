#include "escalate/rules.hpp"

#include <algorithm>
#include <stdexcept>

#include "escalate/stats.hpp"

namespace escalate {

void RuleConfig::validate() const {
  if (setting != 1 && setting != 2) throw std::invalid_argument("setting must be 1 or 2");
  for (double t : {hard_safety_threshold, unsafe_threshold, safe_threshold, cv_threshold, tau_cycle1})
    if (t <= 0.0 || t >= 1.0) throw std::invalid_argument("rule thresholds must lie in (0,1)");
  if (cv_min_patients < 1 || sufficient_n < 1) throw std::invalid_argument("rule counts must be positive");
  if (kfold < 1.0) throw std::invalid_argument("kfold factor must be at least 1");
}

std::pair<int, int> cycle1_counts(const TrialState& state, int level) {
  int n = 0, m = 0;
  for (const auto& p : state.patients) {
    if (p.dose_level != level || p.cycles_observed() < 1) continue;
    ++n;
    m += p.outcomes[0].dlt ? 1 : 0;
  }
  return {n, m};
}

bool hard_safety_excluded(int m_dlt_cycle1, int n_cycle1, const RuleConfig& cfg) {
  if (n_cycle1 < 1) return false;
  double tail = stats::beta_tail(1.0 + m_dlt_cycle1, 1.0 + n_cycle1 - m_dlt_cycle1, cfg.tau_cycle1);
  return tail > cfg.hard_safety_threshold;
}

bool apply_hard_safety(TrialState& state, const DoseGrid& grid, const RuleConfig& cfg) {
  if (cfg.setting != 2) return false;
  for (int j = 0; j < grid.levels(); ++j) {
    if (state.excluded(j)) return false;  // this level and above are already out
    auto [n, m] = cycle1_counts(state, j);
    if (hard_safety_excluded(m, n, cfg)) {
      state.exclude_from(j, grid.levels());
      return true;
    }
  }
  return false;
}

int kfold_filter(int candidate, const TrialState& state, const DoseGrid& grid,
                 const RuleConfig& cfg) {
  double top = -1.0;
  for (const auto& p : state.patients) top = std::max(top, grid[p.dose_level]);
  if (top < 0.0) return candidate;
  double bound = cfg.kfold * top;
  int level = candidate;
  while (level > 0 && grid[level] > bound) --level;
  return level;
}

int exclusion_clip(int candidate, const TrialState& state) {
  int level = candidate;
  while (level >= 0 && state.excluded(level)) --level;
  return level;
}

std::vector<StopReason> evaluate_stopping(const TrialState& state, const TrialConfig& trial,
                                          int candidate,
                                          const std::vector<double>& prob_above_cycle1,
                                          std::optional<double> cv, const RuleConfig& cfg) {
  std::vector<StopReason> out;
  const int levels = static_cast<int>(prob_above_cycle1.size());
  const bool full = cfg.setting == 2;

  if (candidate >= 0 && state.treated_at(candidate) >= cfg.sufficient_n)
    out.push_back(StopReason::kSufficientInformation);

  if (full && state.treated_at(0) >= 1 && prob_above_cycle1.at(0) > cfg.unsafe_threshold)
    out.push_back(StopReason::kLowestUnsafe);

  if (full && state.treated_at(levels - 1) >= 1 &&
      1.0 - prob_above_cycle1.at(levels - 1) > cfg.safe_threshold)
    out.push_back(StopReason::kHighestVerySafe);

  if (full && cv.has_value() && *cv < cfg.cv_threshold) {
    int with_cycle = 0;
    for (const auto& p : state.patients) with_cycle += p.cycles_observed() >= 1 ? 1 : 0;
    if (with_cycle >= cfg.cv_min_patients) out.push_back(StopReason::kPrecision);
  }

  if (full) {
    auto [n1, m1] = cycle1_counts(state, 0);
    if (hard_safety_excluded(m1, n1, cfg)) out.push_back(StopReason::kHardSafety);
  }

  if (state.enrolled() >= trial.max_patients) out.push_back(StopReason::kMaxPatients);

  return out;
}

}  // namespace escalate
