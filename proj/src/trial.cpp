#include "escalate/trial.hpp"

#include <algorithm>

namespace escalate {

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kSufficientInformation: return "sufficient_information";
    case StopReason::kLowestUnsafe: return "lowest_unsafe";
    case StopReason::kHighestVerySafe: return "highest_very_safe";
    case StopReason::kPrecision: return "precision";
    case StopReason::kHardSafety: return "hard_safety";
    case StopReason::kMaxPatients: return "max_patients";
  }
  return "?";
}

TrialState record_cycle_outcomes(const TrialState& state, const std::vector<PatientCycle>& outcomes,
                                 const TrialConfig& cfg) {
  TrialState next = state;
  for (const auto& oc : outcomes) {
    if (oc.patient_id < 0 || oc.patient_id >= next.enrolled())
      throw std::invalid_argument("record_cycle_outcomes: unknown patient id");
    PatientRecord& p = next.patients[oc.patient_id];
    if (p.off_study)
      throw std::invalid_argument("record_cycle_outcomes: outcome supplied for off-study patient");
    if (p.cycles_observed() >= cfg.cycles)
      throw std::invalid_argument("record_cycle_outcomes: patient already fully observed");
    if (oc.outcome.dlt != (oc.outcome.max_grade >= 3))
      throw std::invalid_argument("record_cycle_outcomes: dlt flag inconsistent with max grade");
    if (oc.outcome.max_grade !=
        *std::max_element(oc.outcome.type_grades.begin(), oc.outcome.type_grades.end()))
      throw std::invalid_argument("record_cycle_outcomes: max_grade != max of type_grades");
    p.outcomes.push_back(oc.outcome);
    if (oc.outcome.dlt) p.off_study = true;
  }
  next.clock = state.clock + 1;
  return next;
}

CycleCountTable count_table(const TrialState& state, int levels, int cycles) {
  CycleCountTable t(levels, cycles);
  for (const auto& p : state.patients) {
    for (int s = 0; s < p.cycles_observed(); ++s) {
      if (p.outcomes[s].dlt)
        t.r[p.dose_level][s] += 1.0;
      else
        t.q[p.dose_level][s] += 1.0;
    }
  }
  return t;
}

double trial_duration_weeks(const TrialState& state, const TrialConfig& cfg) {
  if (!state.is_stopped()) throw std::invalid_argument("trial_duration_weeks: trial has not stopped");
  double max_cycles = 0.0;
  for (const auto& p : state.patients) {
    // a DLT patient contributes the cycles up to and including the DLT cycle
    double end = p.enroll_cycle + p.cycles_observed();
    max_cycles = std::max(max_cycles, end);
  }
  return cfg.cycle_weeks * max_cycles;
}

}  // namespace escalate
