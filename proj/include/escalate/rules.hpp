#pragma once

#include <optional>
#include <vector>

#include "escalate/trial.hpp"

// Enforcement and stopping rules around the escalation engines. Setting 1
// keeps only the k-fold enforcement plus the sufficient-information and
// maximum-patients stops; setting 2 applies everything.

namespace escalate {

struct RuleConfig {
  int setting = 2;
  double hard_safety_threshold = 0.95;
  double unsafe_threshold = 0.80;   // lowest dose deemed unsafe
  double safe_threshold = 0.80;     // highest dose deemed very safe
  double cv_threshold = 0.30;
  int cv_min_patients = 9;
  int sufficient_n = 9;
  double kfold = 2.0;
  double tau_cycle1 = 0.3;
  void validate() const;
};

/// Cycle-1 (n, DLT) counts at one dose level.
std::pair<int, int> cycle1_counts(const TrialState& state, int level);

/// Beta(1,1)-binomial check: P(p1 > tau_cycle1 | m of n) > hard_safety_threshold.
bool hard_safety_excluded(int m_dlt_cycle1, int n_cycle1, const RuleConfig& cfg);

/// Applies the hard-safety enforcement rule to the state: the lowest dose
/// whose cycle-1 data trip the check, and everything above it, is excluded.
/// No-op in setting 1. Returns true when a new exclusion was added.
bool apply_hard_safety(TrialState& state, const DoseGrid& grid, const RuleConfig& cfg);

/// K-fold enforcement: the highest level at or below the candidate whose
/// dose value is at most kfold times the highest experimented dose value.
/// With no experimented dose the candidate passes through.
int kfold_filter(int candidate, const TrialState& state, const DoseGrid& grid,
                 const RuleConfig& cfg);

/// Highest non-excluded level at or below the candidate; -1 when none.
int exclusion_clip(int candidate, const TrialState& state);

/// All stopping rules triggered for the filtered candidate.
/// `prob_above_cycle1` holds per-dose P(p1 > tau_cycle1 | data) from the
/// design's own cycle-1 model; `cv` is the precision rule's coefficient of
/// variation when the design has posterior MTD draws.
std::vector<StopReason> evaluate_stopping(const TrialState& state, const TrialConfig& trial,
                                          int candidate,
                                          const std::vector<double>& prob_above_cycle1,
                                          std::optional<double> cv, const RuleConfig& cfg);

}  // namespace escalate
