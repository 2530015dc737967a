#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "escalate/trial.hpp"

using namespace escalate;

namespace {

TrialConfig default_config() {
  TrialConfig cfg;
  cfg.validate();
  return cfg;
}

TrialState three_patients() {
  TrialState s;
  for (int i = 0; i < 3; ++i) {
    PatientRecord p;
    p.id = i;
    p.z = 0.5;
    p.dose_level = i == 1 ? 0 : 1;
    p.enroll_cycle = i == 2 ? 2 : 0;
    s.patients.push_back(p);
  }
  return s;
}

CycleOutcome no_dlt(int grade = 1) {
  CycleOutcome o;
  o.dlt = false;
  o.max_grade = grade;
  o.type_grades = {grade, 0, 0};
  return o;
}

CycleOutcome dlt(int grade = 3) {
  CycleOutcome o;
  o.dlt = true;
  o.max_grade = grade;
  o.type_grades = {0, grade, 0};
  return o;
}

}  // namespace

TEST_CASE("dose grid validation") {
  CHECK_NOTHROW(DoseGrid({18.5, 25.9, 36.25, 50.75, 71.0, 99.4}));
  CHECK_THROWS_AS(DoseGrid({10.0}), std::invalid_argument);
  CHECK_THROWS_AS(DoseGrid({10.0, 10.0}), std::invalid_argument);
  CHECK_THROWS_AS(DoseGrid({10.0, 5.0}), std::invalid_argument);
  CHECK_THROWS_AS(DoseGrid({0.0, 5.0}), std::invalid_argument);
  CHECK_THROWS_AS(DoseGrid({-1.0, 5.0}), std::invalid_argument);
}

TEST_CASE("trial config validation") {
  TrialConfig cfg = default_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.max_patients = 31;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = default_config();
  cfg.tau_cycle1 = 0.5;  // above tau
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = default_config();
  cfg.cycles = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("recording outcomes appends, advances the clock and retires DLT patients") {
  TrialConfig cfg = default_config();
  TrialState s = three_patients();

  s = record_cycle_outcomes(s, {{0, no_dlt()}, {1, dlt()}, {2, no_dlt(2)}}, cfg);
  CHECK(s.clock == 1);
  CHECK(s.patients[0].cycles_observed() == 1);
  CHECK(s.patients[1].off_study);
  CHECK_FALSE(s.patients[0].off_study);

  // off-study patient can no longer receive outcomes
  CHECK_THROWS_AS(record_cycle_outcomes(s, {{1, no_dlt()}}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(record_cycle_outcomes(s, {{7, no_dlt()}}, cfg), std::invalid_argument);

  s = record_cycle_outcomes(s, {{0, no_dlt()}, {2, no_dlt()}}, cfg);
  s = record_cycle_outcomes(s, {{0, dlt(4)}, {2, no_dlt()}}, cfg);
  CHECK(s.clock == 3);
  CHECK(s.patients[0].off_study);
  CHECK(s.patients[2].cycles_observed() == 3);

  // fully observed patient rejected
  CHECK_THROWS_AS(record_cycle_outcomes(s, {{2, no_dlt()}}, cfg), std::invalid_argument);
}

TEST_CASE("outcome internal consistency is enforced") {
  TrialConfig cfg = default_config();
  TrialState s = three_patients();

  CycleOutcome bad;
  bad.dlt = true;
  bad.max_grade = 2;  // DLT flag but grade < 3
  bad.type_grades = {2, 0, 0};
  CHECK_THROWS_AS(record_cycle_outcomes(s, {{0, bad}}, cfg), std::invalid_argument);

  bad.dlt = false;
  bad.max_grade = 3;  // grade 3 without DLT flag
  bad.type_grades = {3, 0, 0};
  CHECK_THROWS_AS(record_cycle_outcomes(s, {{0, bad}}, cfg), std::invalid_argument);

  bad.dlt = false;
  bad.max_grade = 2;
  bad.type_grades = {1, 0, 0};  // max of types != max_grade
  CHECK_THROWS_AS(record_cycle_outcomes(s, {{0, bad}}, cfg), std::invalid_argument);
}

TEST_CASE("count table matches a hand tally") {
  TrialConfig cfg = default_config();
  TrialState s = three_patients();
  s = record_cycle_outcomes(s, {{0, no_dlt()}, {1, dlt()}, {2, no_dlt()}}, cfg);
  s = record_cycle_outcomes(s, {{0, no_dlt()}, {2, no_dlt()}}, cfg);
  s = record_cycle_outcomes(s, {{0, dlt()}}, cfg);

  CycleCountTable t = count_table(s, 2, 3);
  CHECK(t.r[0][0] == 1.0);  // patient 1, dose 0, cycle 1
  CHECK(t.q[1][0] == 2.0);  // patients 0 and 2
  CHECK(t.q[1][1] == 2.0);
  CHECK(t.r[1][2] == 1.0);  // patient 0's cycle-3 DLT
  CHECK(t.q[1][2] == 0.0);
  CHECK(t.r[0][1] == 0.0);
}

TEST_CASE("trial duration is the last patient's last follow-up cycle") {
  TrialConfig cfg = default_config();
  TrialState s = three_patients();
  s = record_cycle_outcomes(s, {{0, no_dlt()}, {1, dlt()}, {2, no_dlt()}}, cfg);
  CHECK_THROWS_AS(trial_duration_weeks(s, cfg), std::invalid_argument);  // still open

  s = record_cycle_outcomes(s, {{0, no_dlt()}, {2, no_dlt()}}, cfg);
  s = record_cycle_outcomes(s, {{0, no_dlt()}, {2, no_dlt()}}, cfg);
  s.stopped.push_back(StopReason::kMaxPatients);
  // patient 2 enrolled at cycle 2 and completed 3 cycles -> 5 cycles of 6 weeks
  CHECK(trial_duration_weeks(s, cfg) == doctest::Approx(30.0));

  // a lone early-DLT cohort ends at its DLT cycle
  TrialState t;
  PatientRecord p;
  p.id = 0;
  s = TrialState{};
  s.patients.push_back(p);
  s = record_cycle_outcomes(s, {{0, dlt()}}, cfg);
  s.stopped.push_back(StopReason::kHardSafety);
  CHECK(trial_duration_weeks(s, cfg) == doctest::Approx(6.0));
}

TEST_CASE("hard-safety exclusion removes the level and everything above") {
  TrialState s;
  s.exclude_from(3, 6);
  CHECK_FALSE(s.excluded(2));
  CHECK(s.excluded(3));
  CHECK(s.excluded(4));
  CHECK(s.excluded(5));
  s.exclude_from(1, 6);
  CHECK(s.excluded(1));
  CHECK(s.excluded(2));
}

TEST_CASE("decision factories carry their payload") {
  auto a = DoseDecision::assign(4);
  CHECK(a.kind == DoseDecision::Kind::kAssign);
  CHECK(a.level == 4);
  auto sp = DoseDecision::stay();
  CHECK(sp.kind == DoseDecision::Kind::kStay);
  auto st = DoseDecision::stop({StopReason::kLowestUnsafe, StopReason::kHardSafety});
  CHECK(st.kind == DoseDecision::Kind::kStop);
  REQUIRE(st.reasons.size() == 2);
  CHECK(st.reasons[0] == StopReason::kLowestUnsafe);
}

TEST_CASE("stop reasons have stable labels") {
  CHECK(std::string(to_string(StopReason::kSufficientInformation)) == "sufficient_information");
  CHECK(std::string(to_string(StopReason::kLowestUnsafe)) == "lowest_unsafe");
  CHECK(std::string(to_string(StopReason::kHighestVerySafe)) == "highest_very_safe");
  CHECK(std::string(to_string(StopReason::kPrecision)) == "precision");
  CHECK(std::string(to_string(StopReason::kHardSafety)) == "hard_safety");
  CHECK(std::string(to_string(StopReason::kMaxPatients)) == "max_patients");
}
