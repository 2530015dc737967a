#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <utility>
#include <vector>

#include "escalate/trial.hpp"

// Interval (model-assisted) escalation machinery: boundary formulas,
// per-cycle decisions on partially observed data, pre-computed decision
// tables, and the isotonic final selection.

namespace escalate {

struct IntervalConfig {
  double tau1 = 0.3519;  // lower edge of the target interval
  double tau2 = 0.5474;  // upper edge
  double eps1 = 0.09775;  // key half-widths; keys are eps1 + eps2 wide
  double eps2 = 0.09775;
  double prior_alpha = 1.0;
  double prior_beta = 1.0;

  void validate() const;
};

enum class Action { kEscalate, kStay, kDeescalate };
const char* to_string(Action a);

/// Follow-up snapshot of the current dose. DLT patients count as complete.
struct DoseSnapshot {
  int n_complete = 0;
  int m_dlt = 0;
  int n_pending = 0;
  std::vector<double> pending_fractions;  // u/S per pending patient

  int treated() const { return n_complete + n_pending; }
  double effective_n() const;
  void validate() const;
};

DoseSnapshot snapshot_at(const TrialState& state, int level, int cycles);

/// Optimal-interval escalation/de-escalation boundaries.
std::pair<double, double> boin_boundaries(double tau1, double tau2, double tau);

/// Escalate iff p-hat <= lambda_e, de-escalate iff >= lambda_d, else stay.
/// With pending patients the denominator is the effective sample size; a
/// guard keeps the dose unchanged while most information is pending.
Action tite_boin_decide(const DoseSnapshot& snap, std::pair<double, double> boundaries);

/// Modal-key decision: Beta posterior mass over equal keys of width
/// tau2 - tau1; stay when the target key is modal (ties resolve to stay).
Action keyboard_decide(const DoseSnapshot& snap, const IntervalConfig& cfg);

struct RollingDecision {
  Action action = Action::kStay;
  bool hold = false;  // best/worst disagreement below the consecutive cap
};

/// Rolling rule: agreement of best-case and worst-case imputations decides
/// immediately; a long consecutive run at the dose falls back to the
/// complete-data decision; otherwise hold accrual.
RollingDecision rmtpi2_decide(const DoseSnapshot& snap, const IntervalConfig& cfg, int consecutive,
                              int consecutive_cap);

/// Pre-computed decision table over reachable follow-up states.
/// `thirds` is the summed pending follow-up in units of one cycle
/// (pending fractions are u/S with u = 1..S-1).
struct DecisionTable {
  enum class Rule { kBoin, kKeyboard, kRolling };
  struct Row {
    int n_complete, m_dlt, n_pending, thirds;
    int capped;  // rolling only: consecutive >= cap (0/1); -1 otherwise
    Action action;
  };
  Rule rule;
  int cycles = 3;
  std::vector<Row> rows;

  Action lookup(const DoseSnapshot& snap, bool capped) const;
  void to_csv(std::ostream& os) const;
};

DecisionTable build_decision_table(DecisionTable::Rule rule, const IntervalConfig& cfg, double tau,
                                   int cycles, int max_patients, int consecutive_cap = 6);

/// Isotonic-regression final selection on completed whole-period data:
/// posterior means smoothed by PAVA, nearest to tau among experimented
/// non-excluded doses, ties to the lower level. Returns -1 when nothing
/// qualifies.
int assisted_final_mtd(const std::vector<std::pair<int, int>>& n_m_per_dose, const IntervalConfig& cfg,
                       double tau, const std::set<int>& excluded);

}  // namespace escalate
