#pragma once

#include <array>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// Domain types shared by every design: doses, the cycle clock, patient
// records, trial history and decision outcomes. TrialState is a value;
// transitions return new states.

namespace escalate {

/// Ordered dose quantities (MBq).
struct DoseGrid {
  std::vector<double> values;

  DoseGrid() = default;
  explicit DoseGrid(std::vector<double> v) : values(std::move(v)) { validate(); }

  int levels() const { return static_cast<int>(values.size()); }
  double operator[](int level) const { return values.at(level); }

  void validate() const {
    if (values.size() < 2) throw std::invalid_argument("DoseGrid: need at least 2 dose levels");
    double prev = 0.0;
    for (double v : values) {
      if (v <= prev) throw std::invalid_argument("DoseGrid: values must be positive and strictly increasing");
      prev = v;
    }
  }
};

struct TrialConfig {
  int cycles = 3;           // follow-up cycles per patient (S)
  double cycle_weeks = 6.0; // duration of one cycle
  int cohort_size = 3;
  int max_patients = 30;
  double tau = 0.391;       // target P(DLT) over all S cycles
  double tau_cycle1 = 0.3;  // target P(DLT) in cycle 1

  void validate() const {
    if (cycles < 1) throw std::invalid_argument("TrialConfig: cycles must be >= 1");
    if (cohort_size < 1) throw std::invalid_argument("TrialConfig: cohort_size must be >= 1");
    if (max_patients < cohort_size || max_patients % cohort_size != 0)
      throw std::invalid_argument("TrialConfig: max_patients must be a positive multiple of cohort_size");
    if (!(tau_cycle1 > 0.0 && tau_cycle1 <= tau && tau < 1.0))
      throw std::invalid_argument("TrialConfig: need 0 < tau_cycle1 <= tau < 1");
    if (cycle_weeks <= 0.0) throw std::invalid_argument("TrialConfig: cycle_weeks must be positive");
  }
};

/// One observed treatment cycle for a patient.
struct CycleOutcome {
  bool dlt = false;
  int max_grade = 0;                  // 0-4, grade >= 3 is a DLT
  std::array<int, 3> type_grades{};   // per toxicity type, max = max_grade
};

struct PatientRecord {
  int id = 0;
  double z = 0.0;          // latent toxicity variable in (0,1)
  int dose_level = 0;      // index into DoseGrid
  int enroll_cycle = 0;    // trial clock at enrollment
  std::vector<CycleOutcome> outcomes;  // one per observed cycle
  bool off_study = false;  // DLT occurred

  int cycles_observed() const { return static_cast<int>(outcomes.size()); }
};

/// DLT / at-risk counts by dose level and cycle.
/// r[j][s-1]: DLTs at dose j in cycle s; q[j][s-1]: patients completing
/// cycle s at dose j without a DLT.
struct CycleCountTable {
  std::vector<std::vector<double>> r, q;

  CycleCountTable(int levels, int cycles)
      : r(levels, std::vector<double>(cycles, 0.0)), q(levels, std::vector<double>(cycles, 0.0)) {}
};

enum class StopReason {
  kSufficientInformation,
  kLowestUnsafe,
  kHighestVerySafe,
  kPrecision,
  kHardSafety,
  kMaxPatients,
};

const char* to_string(StopReason r);

struct TrialState {
  int clock = 0;  // elapsed cycles
  std::vector<PatientRecord> patients;
  std::set<int> excluded_doses;  // upper set of levels barred by hard safety
  int current_dose = 0;
  int consecutive_at_current = 0;  // patients assigned at current_dose since last dose change
  std::vector<StopReason> stopped; // empty while the trial is open
  std::optional<int> recommendation;

  bool is_stopped() const { return !stopped.empty(); }
  int enrolled() const { return static_cast<int>(patients.size()); }

  int treated_at(int level) const {
    int n = 0;
    for (const auto& p : patients) n += (p.dose_level == level);
    return n;
  }

  bool excluded(int level) const { return excluded_doses.count(level) > 0; }

  /// Exclude `level` and everything above it.
  void exclude_from(int level, int levels_total) {
    for (int j = level; j < levels_total; ++j) excluded_doses.insert(j);
  }
};

/// Outcome of a per-cycle design decision. `assign` enrolls the next cohort
/// at the given level; `stay` re-assigns the current dose (a cohort still
/// enrolls every cycle); `stop` ends enrollment.
struct DoseDecision {
  enum class Kind { kAssign, kStay, kStop } kind = Kind::kAssign;
  int level = 0;                      // valid when kind == kAssign
  std::vector<StopReason> reasons;    // valid when kind == kStop

  static DoseDecision assign(int level) { return {Kind::kAssign, level, {}}; }
  static DoseDecision stay() { return {Kind::kStay, 0, {}}; }
  static DoseDecision stop(std::vector<StopReason> why) { return {Kind::kStop, 0, std::move(why)}; }
};

/// Per-patient input to record_cycle_outcomes.
struct PatientCycle {
  int patient_id = 0;
  CycleOutcome outcome;
};

/// Apply one cycle of observed outcomes; the clock advances by one cycle.
/// Rejects outcomes for off-study or fully-observed patients.
TrialState record_cycle_outcomes(const TrialState& state, const std::vector<PatientCycle>& outcomes,
                                 const TrialConfig& cfg);

/// Tally DLT and completion counts from the recorded patient histories.
CycleCountTable count_table(const TrialState& state, int levels, int cycles);

/// Total trial length in weeks until every recruited patient has finished
/// follow-up or gone off study with a DLT. Requires a stopped trial whose
/// residual follow-up has been simulated out.
double trial_duration_weeks(const TrialState& state, const TrialConfig& cfg);

}  // namespace escalate
