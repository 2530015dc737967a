#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "doctest.h"
#include "escalate/rng.hpp"
#include "escalate/rules.hpp"
#include "escalate/stats.hpp"

using namespace escalate;

namespace {

PatientRecord make_patient(int id, int dose, int observed, bool dlt_first) {
  PatientRecord p;
  p.id = id;
  p.dose_level = dose;
  p.outcomes.resize(observed);
  for (auto& o : p.outcomes) o.max_grade = 1;
  if (dlt_first && observed > 0) {
    p.outcomes.front().dlt = true;
    p.outcomes.front().max_grade = 3;
    p.outcomes.front().type_grades = {3, 0, 0};
    p.outcomes.resize(1);
    p.off_study = true;
  }
  return p;
}

void add_patients(TrialState& s, int dose, int count, int observed, int dlts) {
  for (int i = 0; i < count; ++i)
    s.patients.push_back(make_patient(s.enrolled(), dose, observed, i < dlts));
}

// composite-Simpson Beta(1+m, 1+n-m) tail, independent of stats::beta_tail
double simpson_tail(int m, int n, double cut) {
  double a = 1.0 + m, b = 1.0 + n - m;
  double lognorm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const int steps = 4000;
  double h = (1.0 - cut) / steps, total = 0.0;
  auto f = [&](double x) {
    if (x <= 0.0 || x >= 1.0) return a > 1.0 && b > 1.0 ? 0.0 : std::exp(lognorm);
    return std::exp(lognorm + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x));
  };
  for (int i = 0; i < steps; ++i) {
    double lo = cut + i * h;
    total += h / 6.0 * (f(lo) + 4.0 * f(lo + h / 2.0) + f(lo + h));
  }
  return total;
}

bool contains(const std::vector<StopReason>& rs, StopReason r) {
  for (StopReason x : rs)
    if (x == r) return true;
  return false;
}

}  // namespace

TEST_CASE("rule config validation") {
  RuleConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.setting = 1;
  CHECK_NOTHROW(cfg.validate());
  cfg.setting = 3;
  CHECK_THROWS(cfg.validate());
  cfg = RuleConfig{};
  cfg.hard_safety_threshold = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = RuleConfig{};
  cfg.cv_threshold = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = RuleConfig{};
  cfg.sufficient_n = 0;
  CHECK_THROWS(cfg.validate());
  cfg = RuleConfig{};
  cfg.kfold = 0.5;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("hard safety matches the published count triples") {
  RuleConfig cfg;
  // 3 of 3, 4 of 6 and 5 of 9 trip the check; one less DLT does not
  CHECK(hard_safety_excluded(3, 3, cfg));
  CHECK_FALSE(hard_safety_excluded(2, 3, cfg));
  CHECK(hard_safety_excluded(4, 6, cfg));
  CHECK_FALSE(hard_safety_excluded(3, 6, cfg));
  CHECK(hard_safety_excluded(5, 9, cfg));
  CHECK_FALSE(hard_safety_excluded(4, 9, cfg));
  CHECK_FALSE(hard_safety_excluded(0, 0, cfg));

  CHECK(std::fabs(simpson_tail(3, 3, 0.3) - 0.9919) < 1e-4);
  CHECK(std::fabs(simpson_tail(2, 3, 0.3) - 0.9163) < 1e-4);
}

TEST_CASE("hard safety classification equals the integral oracle") {
  RuleConfig cfg;
  for (int n = 1; n <= 12; ++n)
    for (int m = 0; m <= n; ++m) {
      bool expect = simpson_tail(m, n, cfg.tau_cycle1) > cfg.hard_safety_threshold;
      CHECK(hard_safety_excluded(m, n, cfg) == expect);
    }
}

TEST_CASE("hard safety exclusion removes the dose and everything above") {
  DoseGrid grid({1.5, 2.5, 3.5, 7.0, 9.0});
  RuleConfig cfg;
  TrialState s;
  add_patients(s, 0, 3, 1, 0);
  add_patients(s, 2, 3, 1, 3);  // 3/3 cycle-1 DLTs at the third level

  CHECK(apply_hard_safety(s, grid, cfg));
  CHECK_FALSE(s.excluded(0));
  CHECK_FALSE(s.excluded(1));
  CHECK(s.excluded(2));
  CHECK(s.excluded(3));
  CHECK(s.excluded(4));
  CHECK_FALSE(apply_hard_safety(s, grid, cfg));  // nothing new on a second pass

  TrialState untouched;
  add_patients(untouched, 2, 3, 1, 3);
  RuleConfig minimal;
  minimal.setting = 1;
  CHECK_FALSE(apply_hard_safety(untouched, grid, minimal));
  CHECK_FALSE(untouched.excluded(2));
}

TEST_CASE("kfold filter clips by dose value") {
  DoseGrid grid({1.5, 2.5, 3.5, 7.0, 9.0});
  RuleConfig cfg;

  TrialState low;
  add_patients(low, 0, 3, 1, 0);  // highest experimented 1.5, bound 3.0
  CHECK(kfold_filter(2, low, grid, cfg) == 1);
  CHECK(kfold_filter(1, low, grid, cfg) == 1);
  CHECK(kfold_filter(4, low, grid, cfg) == 1);

  TrialState mid;
  add_patients(mid, 2, 3, 1, 0);  // highest experimented 3.5, bound 7.0
  CHECK(kfold_filter(3, mid, grid, cfg) == 3);  // 7.0 <= 7.0 passes
  CHECK(kfold_filter(4, mid, grid, cfg) == 3);
  CHECK(kfold_filter(0, mid, grid, cfg) == 0);  // below the bound, unchanged

  TrialState empty;
  CHECK(kfold_filter(3, empty, grid, cfg) == 3);  // nothing experimented yet

  // clipped level never exceeds the candidate and is monotone in it
  rng::Stream stream(rng::hash_key(rng::kTest, 960));
  for (int t = 0; t < 50; ++t) {
    TrialState s;
    add_patients(s, stream.uniform_int(5), 3, 1, 0);
    int prev = 0;
    for (int cand = 0; cand < 5; ++cand) {
      int got = kfold_filter(cand, s, grid, cfg);
      CHECK(got <= cand);
      CHECK(got >= prev);
      prev = got;
    }
  }
}

TEST_CASE("exclusion clip walks down to an allowed level") {
  TrialState s;
  s.exclude_from(3, 6);
  CHECK(exclusion_clip(4, s) == 2);
  CHECK(exclusion_clip(2, s) == 2);
  s.exclude_from(0, 6);
  CHECK(exclusion_clip(5, s) == -1);
}

TEST_CASE("stopping rules trigger per the published setting split") {
  TrialConfig trial;
  RuleConfig full;
  RuleConfig minimal;
  minimal.setting = 1;
  std::vector<double> flat(6, 0.5);

  SUBCASE("nine treated at the candidate stop for sufficient information") {
    TrialState s;
    add_patients(s, 1, 9, 2, 1);
    for (const auto& cfg : {full, minimal}) {
      auto rs = evaluate_stopping(s, trial, 1, flat, std::nullopt, cfg);
      CHECK(contains(rs, StopReason::kSufficientInformation));
      CHECK(rs.size() == 1);
    }
    auto other = evaluate_stopping(s, trial, 2, flat, std::nullopt, full);
    CHECK(other.empty());  // the rule is about the candidate dose
  }

  SUBCASE("unsafe lowest dose needs a cohort there") {
    std::vector<double> probs = flat;
    probs[0] = 0.81;
    TrialState visited;
    add_patients(visited, 0, 3, 1, 1);
    auto rs = evaluate_stopping(visited, trial, 0, probs, std::nullopt, full);
    CHECK(contains(rs, StopReason::kLowestUnsafe));
    CHECK_FALSE(contains(evaluate_stopping(visited, trial, 0, probs, std::nullopt, minimal),
                         StopReason::kLowestUnsafe));

    TrialState unvisited;
    add_patients(unvisited, 1, 3, 1, 1);
    CHECK(evaluate_stopping(unvisited, trial, 1, probs, std::nullopt, full).empty());

    probs[0] = 0.80;  // threshold is strict
    CHECK(evaluate_stopping(visited, trial, 0, probs, std::nullopt, full).empty());
  }

  SUBCASE("very safe highest dose needs a cohort there") {
    std::vector<double> probs = flat;
    probs[5] = 0.19;
    TrialState visited;
    add_patients(visited, 5, 3, 1, 0);
    auto rs = evaluate_stopping(visited, trial, 5, probs, std::nullopt, full);
    CHECK(contains(rs, StopReason::kHighestVerySafe));
    CHECK_FALSE(contains(evaluate_stopping(visited, trial, 5, probs, std::nullopt, minimal),
                         StopReason::kHighestVerySafe));

    TrialState unvisited;
    add_patients(unvisited, 0, 3, 1, 0);
    CHECK(evaluate_stopping(unvisited, trial, 0, probs, std::nullopt, full).empty());
  }

  SUBCASE("precision needs nine on treatment and a small cv") {
    TrialState s;
    add_patients(s, 1, 6, 2, 0);
    add_patients(s, 2, 3, 1, 0);
    auto rs = evaluate_stopping(s, trial, 2, flat, 0.1, full);
    CHECK(contains(rs, StopReason::kPrecision));
    CHECK_FALSE(contains(evaluate_stopping(s, trial, 2, flat, 0.1, minimal), StopReason::kPrecision));
    CHECK(evaluate_stopping(s, trial, 2, flat, 0.31, full).empty());
    CHECK(evaluate_stopping(s, trial, 2, flat, std::nullopt, full).empty());
    CHECK(evaluate_stopping(s, trial, 2, flat,
                            std::numeric_limits<double>::infinity(), full)
              .empty());

    TrialState few;
    add_patients(few, 1, 8, 2, 0);
    CHECK(evaluate_stopping(few, trial, 1, flat, 0.1, full).empty());
  }

  SUBCASE("hard safety at the lowest dose") {
    TrialState s;
    add_patients(s, 0, 3, 1, 3);
    auto rs = evaluate_stopping(s, trial, 0, flat, std::nullopt, full);
    CHECK(contains(rs, StopReason::kHardSafety));
    CHECK_FALSE(contains(evaluate_stopping(s, trial, 0, flat, std::nullopt, minimal),
                         StopReason::kHardSafety));
  }

  SUBCASE("maximum patients") {
    TrialState s;
    for (int c = 0; c < 10; ++c) add_patients(s, c % 3, 3, 1, 0);
    REQUIRE(s.enrolled() == trial.max_patients);
    for (const auto& cfg : {full, minimal})
      CHECK(contains(evaluate_stopping(s, trial, 2, flat, std::nullopt, cfg),
                     StopReason::kMaxPatients));
  }

  SUBCASE("reasons accumulate") {
    TrialState s;
    for (int c = 0; c < 10; ++c) add_patients(s, 1, 3, 1, 0);
    auto rs = evaluate_stopping(s, trial, 1, flat, std::nullopt, full);
    CHECK(contains(rs, StopReason::kSufficientInformation));
    CHECK(contains(rs, StopReason::kMaxPatients));
  }
}

TEST_CASE("setting 1 only ever emits the two minimal reasons") {
  TrialConfig trial;
  RuleConfig minimal;
  minimal.setting = 1;
  rng::Stream stream(rng::hash_key(rng::kTest, 961));
  for (int t = 0; t < 200; ++t) {
    TrialState s;
    int cohorts = 1 + stream.uniform_int(10);
    for (int c = 0; c < cohorts; ++c)
      add_patients(s, stream.uniform_int(6), 3, 1 + stream.uniform_int(3), stream.uniform_int(4));
    std::vector<double> probs(6);
    for (auto& v : probs) v = stream.u01();
    std::optional<double> cv;
    if (stream.u01() < 0.7) cv = stream.u01();
    int candidate = stream.uniform_int(6);
    for (StopReason r : evaluate_stopping(s, trial, candidate, probs, cv, minimal))
      CHECK((r == StopReason::kSufficientInformation || r == StopReason::kMaxPatients));
  }
}
