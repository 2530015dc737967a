#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "escalate/designs.hpp"
#include "escalate/harness.hpp"
#include "escalate/rules.hpp"
#include "escalate/trial.hpp"

// Study outputs: fixed-column CSV tables and JSON-lines trial records. A
// record line carries the patient histories and the decision trail, so the
// same parser serves saved results and hand-entered histories, and any
// logged decision can be replayed against the engine.

namespace escalate {

/// Locale-independent 6-significant-digit number formatting.
std::string format_number(double v);

/// One design x scenario summary destined for the CSV tables.
struct StudyRow {
  std::string design;
  std::string scenario;
  int setting = 1;
  StudyMetrics metrics;
};

// Columns: design, scenario, setting, replications, flagged, pcs,
// benchmark_pcs, mean_duration_weeks, sd_duration_weeks, mean_patients,
// sd_patients.
void write_metrics_csv(std::ostream& os, const std::vector<StudyRow>& rows);
// Columns: design, scenario, dose_1..dose_J (mean patients per level).
void write_allocations_csv(std::ostream& os, const std::vector<StudyRow>& rows);
// Columns: design, scenario, then one percentage column per stopping rule.
void write_stops_csv(std::ostream& os, const std::vector<StudyRow>& rows);

/// One trial: identity, inputs for replay, and (for simulated runs) the
/// decision trail and result. Histories may omit everything but patients.
struct TrialRecord {
  std::string design;
  std::string scenario;
  std::uint64_t seed = 0;
  int replication = 0;
  std::vector<PatientRecord> patients;
  std::vector<DecisionTrace> decisions;
  std::optional<TrialResult> result;
};

void write_record(std::ostream& os, const TrialRecord& rec);
TrialRecord parse_record(const std::string& line);
std::vector<TrialRecord> read_records(std::istream& is);

/// A history is either one full record line or a bare sequence of patient
/// lines ({"dose_level":..,"enroll_cycle":..,"outcomes":[..]}); both load
/// into the record shape.
TrialRecord read_history(std::istream& is);

/// Trial state rebuilt from patient rows at a clock: follow-up truncated to
/// what was visible, cohort bookkeeping restored from enrollment order.
/// clock < 0 means "now", the latest observed cycle.
TrialState reconstruct_state(const std::vector<PatientRecord>& patients, int clock,
                             const TrialConfig& trial);

/// Re-derives every logged decision of a record through decide_next and
/// returns one message per divergence; empty means the log replays exactly.
std::vector<std::string> replay_mismatches(const TrialRecord& rec, const Design& design,
                                           const DoseGrid& grid, const TrialConfig& trial,
                                           const RuleConfig& rules);

}  // namespace escalate
