#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "escalate/designs.hpp"
#include "escalate/interval.hpp"
#include "escalate/rng.hpp"
#include "escalate/stats.hpp"

using namespace escalate;

namespace {

// Composite-Simpson mass of Beta(a,b) over [lo,hi]; deliberately avoids the
// incomplete-beta routine the library uses. Valid for a,b >= 1.
double beta_mass_simpson(double a, double b, double lo, double hi) {
  const double logc = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  auto dens = [&](double x) {
    double lx = (a == 1.0) ? 0.0 : (a - 1.0) * std::log(std::max(x, 1e-300));
    double l1x = (b == 1.0) ? 0.0 : (b - 1.0) * std::log(std::max(1.0 - x, 1e-300));
    return std::exp(logc + lx + l1x);
  };
  const int n = 2000;  // even
  double h = (hi - lo) / n;
  double acc = dens(lo) + dens(hi);
  for (int i = 1; i < n; ++i) acc += dens(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

struct OracleModal {
  Action action = Action::kStay;
  bool ambiguous = false;  // top two masses too close to trust the quadrature
};

// Re-derivation of the modal-key rule: tile keys of width tau2-tau1 so the
// target interval is one key, integrate each by Simpson, take the mode.
OracleModal oracle_modal_action(double a, double b, const IntervalConfig& cfg) {
  double width = cfg.tau2 - cfg.tau1;
  double left = cfg.tau1;
  while (left > 1e-12) left -= width;
  int idx = static_cast<int>(std::llround((left - cfg.tau1) / width));
  std::vector<std::pair<int, double>> mass;
  for (; left < 1.0 - 1e-12; left += width, ++idx) {
    double l = std::max(0.0, left);
    double r = std::min(1.0, left + width);
    if (r <= l) continue;
    mass.push_back({idx, beta_mass_simpson(a, b, l, r)});
  }
  std::vector<double> sorted;
  for (auto& [i, m] : mass) sorted.push_back(m);
  std::sort(sorted.rbegin(), sorted.rend());
  OracleModal out;
  if (sorted.size() > 1 && sorted[0] - sorted[1] < 1e-7) {
    // a genuine tie or quadrature noise; the exact-mass comparison decides
    out.ambiguous = true;
    return out;
  }
  int best = mass.front().first;
  for (auto& [i, m] : mass)
    if (m > 0.0 && m >= sorted[0]) best = i;
  if (best == 0) out.action = Action::kStay;
  else if (best < 0) out.action = Action::kEscalate;
  else out.action = Action::kDeescalate;
  return out;
}

int rank(Action a) { return static_cast<int>(a); }  // escalate < stay < de-escalate

PatientRecord make_patient(int id, int dose, int observed, bool dlt_last) {
  PatientRecord p;
  p.id = id;
  p.dose_level = dose;
  p.outcomes.resize(observed);
  if (dlt_last && observed > 0) {
    p.outcomes.back().dlt = true;
    p.outcomes.back().max_grade = 3;
    p.outcomes.back().type_grades = {3, 0, 0};
    p.off_study = true;
  }
  return p;
}

// count patients at `dose`: first `dlts` go off study with a DLT on their
// last observed cycle, the rest complete `observed` clean cycles
void add_patients(TrialState& s, int dose, int count, int observed, int dlts) {
  for (int i = 0; i < count; ++i)
    s.patients.push_back(make_patient(s.enrolled(), dose, observed, i < dlts));
}

int resolved_level(const DoseDecision& d, const TrialState& s) {
  REQUIRE(d.kind != DoseDecision::Kind::kStop);
  return d.kind == DoseDecision::Kind::kStay ? s.current_dose : d.level;
}

struct Fixture {
  DoseGrid grid{{1.5, 3.0, 4.5, 6.0, 7.5, 9.0}};
  TrialConfig cfg;
  DesignContext ctx{&grid, &cfg, rng::hash_key(rng::kTest, 77)};
};

}  // namespace

TEST_CASE("interval config validation") {
  IntervalConfig good;
  CHECK_NOTHROW(good.validate());
  IntervalConfig bad = good;
  bad.tau2 = bad.tau1;
  CHECK_THROWS(bad.validate());
  bad = good;
  bad.eps1 = 0.05;  // keys no longer tile against the interval edges
  CHECK_THROWS(bad.validate());
  bad = good;
  bad.prior_alpha = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("snapshot validation and effective sample size") {
  DoseSnapshot snap{2, 1, 2, {1.0 / 3.0, 2.0 / 3.0}};
  CHECK_NOTHROW(snap.validate());
  CHECK(snap.treated() == 4);
  CHECK(std::fabs(snap.effective_n() - 3.0) < 1e-12);

  DoseSnapshot bad{1, 0, 2, {0.5}};  // fraction count mismatch
  CHECK_THROWS(bad.validate());
  DoseSnapshot bad2{1, 0, 1, {1.0}};  // pending must be strictly unfinished
  CHECK_THROWS(bad2.validate());
  DoseSnapshot bad3{1, 2, 0, {}};
  CHECK_THROWS(bad3.validate());
}

TEST_CASE("snapshot_at tallies follow-up by level") {
  TrialState s;
  s.patients.push_back(make_patient(0, 1, 3, false));  // complete, clean
  s.patients.push_back(make_patient(1, 1, 2, true));   // DLT in cycle 2
  s.patients.push_back(make_patient(2, 1, 1, false));  // pending, 1/3 done
  s.patients.push_back(make_patient(3, 0, 3, false));  // other level
  DoseSnapshot snap = snapshot_at(s, 1, 3);
  CHECK(snap.n_complete == 2);
  CHECK(snap.m_dlt == 1);
  CHECK(snap.n_pending == 1);
  REQUIRE(snap.pending_fractions.size() == 1);
  CHECK(std::fabs(snap.pending_fractions[0] - 1.0 / 3.0) < 1e-12);
  DoseSnapshot other = snapshot_at(s, 2, 3);
  CHECK(other.treated() == 0);
}

TEST_CASE("escalation boundaries match the published pair") {
  auto [le, ld] = boin_boundaries(0.3128, 0.5083, 0.391);
  CHECK(std::fabs(le - 0.3512) < 5e-5);
  CHECK(std::fabs(ld - 0.4492) < 5e-5);
}

TEST_CASE("boundaries satisfy the likelihood indifference identity") {
  // lambda_e is where one observation is equally likely under tau1 and tau;
  // lambda_d likewise for tau and tau2. Independent characterisation of the
  // closed-form boundaries.
  for (int t = 0; t < 200; ++t) {
    double tau = 0.06 + 0.44 * rng::hash_u01(rng::kTest, 101, t, 0);
    double tau1 = tau * (0.4 + 0.55 * rng::hash_u01(rng::kTest, 101, t, 1));
    double tau2 = tau + (std::min(0.95, 1.6 * tau) - tau) * (0.05 + 0.9 * rng::hash_u01(rng::kTest, 101, t, 2));
    auto [le, ld] = boin_boundaries(tau1, tau2, tau);
    CHECK(tau1 < le);
    CHECK(le < tau);
    CHECK(tau < ld);
    CHECK(ld < tau2);
    double ident_e = le * std::log(tau1 / tau) + (1.0 - le) * std::log((1.0 - tau1) / (1.0 - tau));
    double ident_d = ld * std::log(tau / tau2) + (1.0 - ld) * std::log((1.0 - tau) / (1.0 - tau2));
    CHECK(std::fabs(ident_e) < 1e-12);
    CHECK(std::fabs(ident_d) < 1e-12);
  }
  // pinched interval: both boundaries collapse onto the target
  auto [le, ld] = boin_boundaries(0.3909, 0.3911, 0.391);
  CHECK(std::fabs(le - 0.391) < 1e-3);
  CHECK(std::fabs(ld - 0.391) < 1e-3);
  CHECK_THROWS(boin_boundaries(0.4, 0.5, 0.3));
}

TEST_CASE("tite-boin worked examples") {
  auto bounds = boin_boundaries(0.3128, 0.5083, 0.391);

  CHECK(tite_boin_decide({3, 0, 0, {}}, bounds) == Action::kEscalate);
  CHECK(tite_boin_decide({3, 2, 0, {}}, bounds) == Action::kDeescalate);

  // one DLT plus two patients a third of the way through follow-up:
  // p-hat = 1 / (1 + 2/3) = 0.6 >= 0.4492
  DoseSnapshot partial{1, 1, 2, {1.0 / 3.0, 1.0 / 3.0}};
  CHECK(tite_boin_decide(partial, bounds) == Action::kDeescalate);

  // with most follow-up outstanding the dose is held
  DoseSnapshot early{0, 0, 3, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
  CHECK(2.0 * early.effective_n() < early.treated());
  CHECK(tite_boin_decide(early, bounds) == Action::kStay);
  // once the weighted sample reaches half the cohort the clean dose escalates
  DoseSnapshot midway{0, 0, 3, {0.5, 0.5, 0.5}};
  CHECK(tite_boin_decide(midway, bounds) == Action::kEscalate);

  CHECK(tite_boin_decide({0, 0, 0, {}}, bounds) == Action::kStay);
}

TEST_CASE("vanishing pending follow-up matches the complete-data rule") {
  auto bounds = boin_boundaries(0.3128, 0.5083, 0.391);
  IntervalConfig cfg;
  for (int nc = 0; nc <= 8; ++nc) {
    for (int m = 0; m <= nc; ++m) {
      for (int np = 0; np <= 3; ++np) {
        DoseSnapshot nearly{nc, m, np, std::vector<double>(np, 1.0 - 1e-12)};
        DoseSnapshot done{nc + np, m, 0, {}};
        CHECK(tite_boin_decide(nearly, bounds) == tite_boin_decide(done, bounds));
        CHECK(keyboard_decide(nearly, cfg) == keyboard_decide(done, cfg));
      }
    }
  }
}

TEST_CASE("keyboard worked examples") {
  IntervalConfig cfg;  // Beta(1,1) prior, target key [0.3519, 0.5474)
  CHECK(keyboard_decide({0, 0, 0, {}}, cfg) == Action::kStay);
  CHECK(keyboard_decide({3, 3, 0, {}}, cfg) == Action::kDeescalate);  // Beta(4,1)
  CHECK(keyboard_decide({6, 0, 0, {}}, cfg) == Action::kEscalate);    // Beta(1,7)

  // three patients a third of the way in, no DLT: Beta(1,2), whose mass
  // peaks in the key just below the target
  DoseSnapshot pending{0, 0, 3, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
  CHECK(keyboard_decide(pending, cfg) == Action::kEscalate);
}

TEST_CASE("keyboard agrees with a simpson-integration oracle") {
  IntervalConfig flat;
  IntervalConfig skew;
  skew.prior_alpha = 1.0;
  skew.prior_beta = 3.0;
  int skipped = 0, total = 0;
  for (int t = 0; t < 400; ++t) {
    rng::Stream stream(rng::hash_key(rng::kTest, 102, t));
    int nc = stream.uniform_int(13);
    int m = stream.uniform_int(nc + 1);
    int np = stream.uniform_int(7);
    std::vector<double> fr;
    for (int i = 0; i < np; ++i) fr.push_back((1 + stream.uniform_int(2)) / 3.0);
    DoseSnapshot snap{nc, m, np, fr};
    const IntervalConfig& cfg = (t % 2 == 0) ? flat : skew;
    double n_eff = snap.effective_n();
    if (n_eff <= 0.0) continue;
    double a = cfg.prior_alpha + m;
    double b = cfg.prior_beta + std::max(0.0, n_eff - m);
    OracleModal oracle = oracle_modal_action(a, b, cfg);
    ++total;
    if (oracle.ambiguous) {
      ++skipped;
      continue;
    }
    CHECK(keyboard_decide(snap, cfg) == oracle.action);
  }
  CHECK(total > 300);
  CHECK(skipped * 10 < total);
}

TEST_CASE("rolling rule without pending patients is the keyboard rule") {
  IntervalConfig cfg;
  for (int nc = 0; nc <= 9; ++nc)
    for (int m = 0; m <= nc; ++m) {
      DoseSnapshot snap{nc, m, 0, {}};
      RollingDecision rd = rmtpi2_decide(snap, cfg, 0, 6);
      CHECK_FALSE(rd.hold);
      CHECK(rd.action == keyboard_decide(snap, cfg));
    }
}

TEST_CASE("rolling rule collapses on best/worst agreement") {
  IntervalConfig cfg;
  // 6 clean completions, one pending: both imputations escalate
  DoseSnapshot snap{6, 0, 1, {2.0 / 3.0}};
  REQUIRE(keyboard_decide({7, 0, 0, {}}, cfg) == Action::kEscalate);
  REQUIRE(keyboard_decide({7, 1, 0, {}}, cfg) == Action::kEscalate);
  RollingDecision rd = rmtpi2_decide(snap, cfg, 0, 6);
  CHECK_FALSE(rd.hold);
  CHECK(rd.action == Action::kEscalate);
}

TEST_CASE("rolling rule holds on disagreement until the consecutive cap") {
  IntervalConfig cfg;
  // 3 DLTs among 3 complete plus 6 pending; the imputations disagree while
  // the complete-data rule de-escalates
  DoseSnapshot snap{3, 3, 6, std::vector<double>(6, 1.0 / 3.0)};
  Action best = keyboard_decide({9, 3, 0, {}}, cfg);
  Action worst = keyboard_decide({9, 9, 0, {}}, cfg);
  REQUIRE(best != worst);
  REQUIRE(keyboard_decide({3, 3, 0, {}}, cfg) == Action::kDeescalate);

  RollingDecision early = rmtpi2_decide(snap, cfg, 5, 6);
  CHECK(early.hold);
  CHECK(early.action == Action::kStay);

  RollingDecision capped = rmtpi2_decide(snap, cfg, 6, 6);
  CHECK_FALSE(capped.hold);
  CHECK(capped.action == Action::kDeescalate);
}

TEST_CASE("decision tables match the live rules on every reachable state") {
  IntervalConfig boin_cfg{.tau1 = 0.3128, .tau2 = 0.5083, .eps1 = 0.09775, .eps2 = 0.09775,
                          .prior_alpha = 0.1, .prior_beta = 0.9};
  IntervalConfig key_cfg;
  const int n_max = 12, cycles = 3;
  auto bounds = boin_boundaries(boin_cfg.tau1, boin_cfg.tau2, 0.391);
  DecisionTable tb = build_decision_table(DecisionTable::Rule::kBoin, boin_cfg, 0.391, cycles, n_max);
  DecisionTable tk = build_decision_table(DecisionTable::Rule::kKeyboard, key_cfg, 0.391, cycles, n_max);
  DecisionTable tr = build_decision_table(DecisionTable::Rule::kRolling, key_cfg, 0.391, cycles, n_max, 6);

  for (int nc = 0; nc <= n_max; ++nc)
    for (int m = 0; m <= nc; ++m)
      for (int np = 0; nc + np <= n_max; ++np) {
        for (int twos = 0; twos <= np; ++twos) {  // pending with 2 of 3 cycles done
          std::vector<double> fr(np, 1.0 / 3.0);
          for (int i = 0; i < twos; ++i) fr[i] = 2.0 / 3.0;
          DoseSnapshot snap{nc, m, np, fr};
          CHECK(tb.lookup(snap, false) == tite_boin_decide(snap, bounds));
          CHECK(tk.lookup(snap, false) == keyboard_decide(snap, key_cfg));
        }
        DoseSnapshot snap{nc, m, np, std::vector<double>(np, 1.0 / 3.0)};
        CHECK(tr.lookup(snap, false) == rmtpi2_decide(snap, key_cfg, 0, 6).action);
        CHECK(tr.lookup(snap, true) == rmtpi2_decide(snap, key_cfg, 6, 6).action);
      }

  DoseSnapshot outside{n_max + 1, 0, 0, {}};
  CHECK_THROWS(tb.lookup(outside, false));
}

TEST_CASE("more observed toxicity never relaxes a decision") {
  // All three rules are monotone in m. The TITE-BOIN evaluability guard
  // depends only on follow-up, never on the DLT count, so it cannot flip a
  // dose between held and evaluable as m grows.
  IntervalConfig cfg;
  auto bounds = boin_boundaries(0.3128, 0.5083, 0.391);
  const int n_max = 12;
  for (int nc = 0; nc <= n_max; ++nc)
    for (int np = 0; nc + np <= n_max; ++np)
      for (int twos = 0; twos <= np; ++twos) {
        std::vector<double> fr(np, 1.0 / 3.0);
        for (int i = 0; i < twos; ++i) fr[i] = 2.0 / 3.0;
        int prev_b = 0, prev_k = 0, prev_r0 = 0, prev_r1 = 0;
        for (int m = 0; m <= nc; ++m) {
          DoseSnapshot snap{nc, m, np, fr};
          int b = rank(tite_boin_decide(snap, bounds));
          int k = rank(keyboard_decide(snap, cfg));
          int r0 = rank(rmtpi2_decide(snap, cfg, 0, 6).action);
          int r1 = rank(rmtpi2_decide(snap, cfg, 6, 6).action);
          if (m > 0) {
            CHECK(b >= prev_b);
            CHECK(k >= prev_k);
            CHECK(r0 >= prev_r0);
            CHECK(r1 >= prev_r1);
          }
          prev_b = b;
          prev_k = k;
          prev_r0 = r0;
          prev_r1 = r1;
        }
      }
}

TEST_CASE("decision table serialises one row per state") {
  IntervalConfig cfg;
  DecisionTable t = build_decision_table(DecisionTable::Rule::kKeyboard, cfg, 0.391, 3, 6);
  std::ostringstream os;
  t.to_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "n_complete,m_dlt,n_pending,pending_thirds,capped,action");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == t.rows.size());
  // keys are unique
  std::set<std::tuple<int, int, int, int, int>> keys;
  for (const auto& r : t.rows) keys.insert({r.n_complete, r.m_dlt, r.n_pending, r.thirds, r.capped});
  CHECK(keys.size() == t.rows.size());
}

TEST_CASE("isotonic final selection worked examples") {
  IntervalConfig cfg;  // Beta(1,1)
  double tau = 0.391;

  // single experimented dose
  CHECK(assisted_final_mtd({{0, 0}, {3, 1}, {0, 0}}, cfg, tau, {}) == 1);

  // posterior means (0.1, 0.45, 0.5): already monotone, middle dose nearest
  CHECK(assisted_final_mtd({{8, 0}, {18, 8}, {8, 4}}, cfg, tau, {}) == 1);

  // violation (0.5, 0.2) pools to (0.35, 0.35); the tie resolves toward the
  // target, so it breaks low against 0.3 and high against 0.391
  CHECK(assisted_final_mtd({{8, 4}, {8, 1}}, cfg, 0.3, {}) == 0);
  CHECK(assisted_final_mtd({{8, 4}, {8, 1}}, cfg, tau, {}) == 1);

  // nothing experimented
  CHECK(assisted_final_mtd({{0, 0}, {0, 0}}, cfg, tau, {}) == -1);

  // excluded doses are skipped even when nearest
  CHECK(assisted_final_mtd({{8, 0}, {18, 8}, {8, 4}}, cfg, tau, {1}) == 2);
  CHECK(assisted_final_mtd({{3, 1}}, cfg, tau, {0}) == -1);
}

TEST_CASE("final selection lands on an experimented non-excluded dose") {
  IntervalConfig cfg;
  for (int t = 0; t < 300; ++t) {
    rng::Stream stream(rng::hash_key(rng::kTest, 103, t));
    int levels = 2 + stream.uniform_int(5);
    std::vector<std::pair<int, int>> counts(levels, {0, 0});
    std::set<int> excluded;
    for (int j = 0; j < levels; ++j) {
      int n = stream.uniform_int(10);
      counts[j] = {n, n > 0 ? stream.uniform_int(n + 1) : 0};
      if (stream.u01() < 0.2) excluded.insert(j);
    }
    int pick = assisted_final_mtd(counts, cfg, 0.391, excluded);
    if (pick >= 0) {
      CHECK(counts[pick].first > 0);
      CHECK(excluded.count(pick) == 0);
    } else {
      for (int j = 0; j < levels; ++j)
        CHECK((counts[j].first == 0 || excluded.count(j) == 1));
    }
  }
}

TEST_CASE("interval engines walk the grid") {
  Fixture fx;
  DesignSettings settings = DesignSettings::defaults(1);
  auto design = make_design(DesignKind::kTiteBoin, settings);
  CHECK(design->name() == "tite-boin");
  CHECK_FALSE(design->model_based());
  CHECK(design->mtd_draws(TrialState{}, fx.ctx).empty());

  TrialState start;
  DoseDecision first = design->propose(start, fx.ctx);
  CHECK(first.kind == DoseDecision::Kind::kAssign);
  CHECK(first.level == 0);

  TrialState clean;
  add_patients(clean, 0, 3, 3, 0);
  clean.current_dose = 0;
  CHECK(resolved_level(design->propose(clean, fx.ctx), clean) == 1);

  TrialState toxic;
  add_patients(toxic, 0, 3, 3, 2);
  toxic.current_dose = 0;
  CHECK(resolved_level(design->propose(toxic, fx.ctx), toxic) == 0);  // floor

  TrialState mid = toxic;
  for (auto& p : mid.patients) p.dose_level = 2;
  mid.current_dose = 2;
  CHECK(resolved_level(design->propose(mid, fx.ctx), mid) == 1);

  TrialState hold;
  add_patients(hold, 2, 5, 3, 2);  // 2/5 complete sits inside the interval
  hold.current_dose = 2;
  DoseDecision stay = design->propose(hold, fx.ctx);
  CHECK(stay.kind == DoseDecision::Kind::kStay);

  TrialState blocked = clean;
  blocked.exclude_from(1, fx.grid.levels());
  CHECK(resolved_level(design->propose(blocked, fx.ctx), blocked) == 0);

  TrialState doomed = clean;
  doomed.exclude_from(0, fx.grid.levels());
  DoseDecision stop = design->propose(doomed, fx.ctx);
  REQUIRE(stop.kind == DoseDecision::Kind::kStop);
  CHECK(stop.reasons == std::vector<StopReason>{StopReason::kHardSafety});
}

TEST_CASE("interval engine recommendation is the isotonic selection") {
  Fixture fx;
  DesignSettings settings = DesignSettings::defaults(1);
  TrialState s;
  add_patients(s, 0, 3, 3, 0);
  add_patients(s, 1, 6, 3, 2);
  add_patients(s, 2, 3, 3, 2);
  s.current_dose = 1;

  std::vector<std::pair<int, int>> counts = {{3, 0}, {6, 2}, {3, 2}, {0, 0}, {0, 0}, {0, 0}};
  for (DesignKind kind : {DesignKind::kTiteBoin, DesignKind::kTiteMtpi2, DesignKind::kRollingMtpi2}) {
    auto design = make_design(kind, settings);
    const IntervalConfig& cfg = kind == DesignKind::kTiteBoin ? settings.boin : settings.mtpi2;
    int expect = assisted_final_mtd(counts, cfg, fx.cfg.tau, {});
    auto rec = design->recommend(s, fx.ctx);
    REQUIRE(rec.has_value());
    CHECK(*rec == expect);
  }

  TrialState none;
  auto design = make_design(DesignKind::kTiteMtpi2, settings);
  CHECK_FALSE(design->recommend(none, fx.ctx).has_value());
}

TEST_CASE("keyboard engine defers to the modal-key rule") {
  Fixture fx;
  auto design = make_design(DesignKind::kTiteMtpi2, DesignSettings::defaults(1));
  CHECK(design->name() == "tite-mtpi2");

  TrialState s;
  add_patients(s, 1, 3, 3, 3);
  s.current_dose = 1;
  CHECK(resolved_level(design->propose(s, fx.ctx), s) == 0);

  TrialState clean;
  add_patients(clean, 1, 6, 3, 0);
  clean.current_dose = 1;
  CHECK(resolved_level(design->propose(clean, fx.ctx), clean) == 2);
}

TEST_CASE("rolling engine reads the consecutive run from the state") {
  Fixture fx;
  auto design = make_design(DesignKind::kRollingMtpi2, DesignSettings::defaults(1));
  CHECK(design->name() == "r-mtpi2");

  TrialState s;
  add_patients(s, 1, 3, 3, 3);   // complete DLTs
  add_patients(s, 1, 6, 1, 0);   // pending, one cycle in
  s.current_dose = 1;

  s.consecutive_at_current = 5;
  DoseDecision held = design->propose(s, fx.ctx);
  CHECK(held.kind == DoseDecision::Kind::kStay);

  s.consecutive_at_current = 6;  // falls back to the complete-data decision
  CHECK(resolved_level(design->propose(s, fx.ctx), s) == 0);
}

TEST_CASE("design factory round-trips names and settings") {
  for (DesignKind kind : all_design_kinds()) {
    auto back = design_from_string(to_string(kind));
    REQUIRE(back.has_value());
    CHECK(*back == kind);
    auto design = make_design(kind, DesignSettings::defaults(1));
    CHECK(design->name() == to_string(kind));
  }
  CHECK_FALSE(design_from_string("3+3").has_value());
  CHECK(all_design_kinds().size() == 8);

  DesignSettings s1 = DesignSettings::defaults(1);
  CHECK(s1.icsdp.pi_star_J == 0.4);
  CHECK(s1.icsdp.n0 == 6.0);
  CHECK(s1.boin.prior_alpha == 0.1);
  CHECK(s1.nttp.prior_mean[0] == 0.1);

  DesignSettings s2 = DesignSettings::defaults(2);
  CHECK(s2.icsdp.pi_star_J == 0.3);
  CHECK(s2.icsdp.n0 == 4.0);
  CHECK(s2.boin.prior_alpha == 1.0);
  CHECK(s2.boin.prior_beta == 1.0);
  CHECK(s2.nttp.prior_mean[0] == 0.05);
  CHECK(s2.nttp.prior_mean[1] == 0.1);
  CHECK(s2.nttp.prior_var[0] == 10.0);
  CHECK(s2.crm.skeleton == s1.crm.skeleton);
  CHECK(s2.mtpi2.tau1 == s1.mtpi2.tau1);

  CHECK_THROWS(DesignSettings::defaults(3));
}
