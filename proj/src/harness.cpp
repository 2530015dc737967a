#include "escalate/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace escalate {

namespace {

struct KahanSum {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

std::vector<StopReason> sorted_unique(std::vector<StopReason> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

void StudyPlan::validate() const {
  scenario.validate();
  trial.validate();
  rules.validate();
  if (replications < 1) throw std::invalid_argument("StudyPlan: replications must be >= 1");
  int levels = scenario.dose_grid.levels();
  switch (design) {
    case DesignKind::kTiteCrm: settings.crm.validate(levels); break;
    case DesignKind::kTiteCrm2: settings.crm2.validate(); break;
    case DesignKind::kIcsdp: settings.icsdp.validate(); break;
    case DesignKind::kPomm: settings.pomm.validate(levels); break;
    case DesignKind::kNttp: settings.nttp.validate(); break;
    case DesignKind::kTiteBoin: settings.boin.validate(); break;
    case DesignKind::kTiteMtpi2:
    case DesignKind::kRollingMtpi2: settings.mtpi2.validate(); break;
  }
}

bool TrialResult::stopped_for(StopReason r) const {
  return std::find(stop_reasons.begin(), stop_reasons.end(), r) != stop_reasons.end();
}

std::uint64_t decision_fit_key(std::uint64_t seed, int replication, int clock) {
  return rng::hash_key(rng::kDesignFit, seed, static_cast<std::uint64_t>(replication),
                       static_cast<std::uint64_t>(clock));
}

DecisionTrace decide_next(TrialState& state, const Design& design, const DesignContext& ctx,
                          const TrialConfig& trial, const RuleConfig& rules) {
  DecisionTrace tr;
  tr.clock = state.clock;
  tr.new_exclusion = apply_hard_safety(state, *ctx.grid, rules);
  tr.raw = design.propose(state, ctx);
  if (tr.raw.kind == DoseDecision::Kind::kStop) {
    tr.stops = tr.raw.reasons;
    return tr;
  }
  int levels = ctx.grid->levels();
  int cand = tr.raw.kind == DoseDecision::Kind::kStay ? state.current_dose : tr.raw.level;
  cand = kfold_filter(cand, state, *ctx.grid, rules);
  cand = exclusion_clip(cand, state);
  if (cand < 0) {
    tr.stops = {StopReason::kHardSafety};
    return tr;
  }
  tr.assigned = cand;
  tr.prob_above.assign(levels, 0.0);
  if (rules.setting == 2) {
    // only the grid edges feed stopping rules 2 and 3, and only once dosed
    if (state.treated_at(0) >= 1)
      tr.prob_above[0] = design.prob_cycle1_above(state, ctx, 0, rules.tau_cycle1);
    if (state.treated_at(levels - 1) >= 1)
      tr.prob_above[levels - 1] =
          design.prob_cycle1_above(state, ctx, levels - 1, rules.tau_cycle1);
    int with_cycle = 0;
    for (const auto& p : state.patients) with_cycle += (p.cycles_observed() >= 1);
    if (with_cycle >= rules.cv_min_patients) {
      std::vector<double> draws = design.mtd_draws(state, ctx);
      if (!draws.empty()) tr.cv = mtd_cv(draws);
    }
  }
  tr.stops = evaluate_stopping(state, trial, cand, tr.prob_above, tr.cv, rules);
  return tr;
}

namespace {

void observe_one_cycle(TrialState& state, const PatientStream& stream,
                       const std::vector<CycleRiskLadder>& ladders, const TrialConfig& cfg) {
  std::vector<PatientCycle> cycle;
  for (const auto& p : state.patients)
    if (!p.off_study && p.cycles_observed() < cfg.cycles)
      cycle.push_back(
          {p.id, generate_outcome(stream, p.id, ladders[p.dose_level], p.cycles_observed() + 1)});
  state = record_cycle_outcomes(state, cycle, cfg);
}

bool follow_up_pending(const TrialState& state, const TrialConfig& cfg) {
  for (const auto& p : state.patients)
    if (!p.off_study && p.cycles_observed() < cfg.cycles) return true;
  return false;
}

}  // namespace

TrialResult run_trial_with(const StudyPlan& plan, int replication, const Design& design,
                           TrialLog* log) {
  plan.validate();
  if (replication < 0) throw std::invalid_argument("run_trial: replication must be >= 0");
  const DoseGrid& grid = plan.scenario.dose_grid;
  const TrialConfig& cfg = plan.trial;
  const int levels = grid.levels();

  PatientStream stream(plan.seed, static_cast<std::uint64_t>(replication), cfg.max_patients);
  std::vector<CycleRiskLadder> ladders;
  ladders.reserve(levels);
  for (int j = 0; j < levels; ++j) ladders.push_back(plan.scenario.ladder(j, cfg.cycles));

  TrialState state;
  TrialResult out;
  out.stream_hash = stream.stream_hash();
  int last_cohort_dose = -1;

  try {
    while (!state.is_stopped()) {
      int room = cfg.max_patients - state.enrolled();
      int cohort = std::min(cfg.cohort_size, room);
      for (int i = 0; i < cohort; ++i) {
        PatientRecord p;
        p.id = state.enrolled();
        p.z = stream.z(p.id);
        p.dose_level = state.current_dose;
        p.enroll_cycle = state.clock;
        state.patients.push_back(p);
      }
      if (cohort > 0) {
        if (state.current_dose == last_cohort_dose)
          state.consecutive_at_current += cohort;
        else
          state.consecutive_at_current = cohort;
        last_cohort_dose = state.current_dose;
      }
      observe_one_cycle(state, stream, ladders, cfg);

      DesignContext ctx{&grid, &cfg, decision_fit_key(plan.seed, replication, state.clock)};
      DecisionTrace tr = decide_next(state, design, ctx, cfg, plan.rules);
      if (log) log->decisions.push_back(tr);
      if (!tr.stops.empty())
        state.stopped = tr.stops;
      else
        state.current_dose = tr.assigned;
    }

    // enrollment has ended; remaining follow-up plays out before the final fit
    while (follow_up_pending(state, cfg)) observe_one_cycle(state, stream, ladders, cfg);

    bool unsafe = false, very_safe = false;
    for (StopReason r : state.stopped) {
      unsafe |= (r == StopReason::kLowestUnsafe || r == StopReason::kHardSafety);
      very_safe |= (r == StopReason::kHighestVerySafe);
    }
    if (unsafe)
      state.recommendation.reset();
    else if (very_safe)
      state.recommendation = levels - 1;
    else {
      DesignContext final_ctx{&grid, &cfg, decision_fit_key(plan.seed, replication, 0)};
      state.recommendation = design.recommend(state, final_ctx);
    }
    out.recommendation = state.recommendation;
    out.duration_weeks = trial_duration_weeks(state, cfg);
    out.stop_reasons = sorted_unique(state.stopped);
  } catch (const std::exception&) {
    out.flagged = true;
    out.recommendation.reset();
    out.duration_weeks = 0.0;
    out.stop_reasons.clear();
  }

  out.n_patients = state.enrolled();
  out.allocations.assign(levels, 0);
  for (const auto& p : state.patients) {
    out.allocations[p.dose_level] += 1;
    out.n_dlt += p.off_study ? 1 : 0;
  }
  if (log) log->patients = state.patients;
  return out;
}

TrialResult run_trial(const StudyPlan& plan, int replication, TrialLog* log) {
  auto design = make_design(plan.design, plan.settings);
  return run_trial_with(plan, replication, *design, log);
}

std::vector<TrialResult> run_replications(const StudyPlan& plan, int threads,
                                          std::vector<TrialLog>* logs) {
  plan.validate();
  auto design = make_design(plan.design, plan.settings);
  const int reps = plan.replications;
  std::vector<TrialResult> out(reps);
  if (logs) logs->assign(reps, {});
#ifdef _OPENMP
  int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#else
  (void)threads;
#endif
  for (int r = 0; r < reps; ++r) {
    try {
      out[r] = run_trial_with(plan, r, *design, logs ? &(*logs)[r] : nullptr);
    } catch (const std::exception&) {
      out[r] = TrialResult{};
      out[r].flagged = true;
      out[r].allocations.assign(plan.scenario.dose_grid.levels(), 0);
    }
  }
  return out;
}

std::vector<TrialResult> run_replications_serial(const StudyPlan& plan,
                                                 std::vector<TrialLog>* logs) {
  plan.validate();
  auto design = make_design(plan.design, plan.settings);
  std::vector<TrialResult> out(plan.replications);
  if (logs) logs->assign(plan.replications, {});
  for (int r = 0; r < plan.replications; ++r)
    out[r] = run_trial_with(plan, r, *design, logs ? &(*logs)[r] : nullptr);
  return out;
}

bool trial_correct(const TrialResult& result, const ScenarioSpec& scenario) {
  switch (scenario.truth) {
    case ScenarioSpec::Truth::kDose:
      return result.recommendation && *result.recommendation == scenario.mtd_level;
    case ScenarioSpec::Truth::kAllUnsafe:
      return !result.recommendation && (result.stopped_for(StopReason::kLowestUnsafe) ||
                                        result.stopped_for(StopReason::kHardSafety));
    case ScenarioSpec::Truth::kAllSafe:
      return result.stopped_for(StopReason::kHighestVerySafe);
  }
  return false;
}

StudyMetrics summarize(const StudyPlan& plan, const std::vector<TrialResult>& results) {
  const int levels = plan.scenario.dose_grid.levels();
  StudyMetrics m;
  m.replications = static_cast<int>(results.size());
  m.mean_allocations.assign(levels, 0.0);

  KahanSum dur, pat, correct, bench;
  std::vector<KahanSum> alloc(levels);
  std::array<long, kStopReasonCount> stop_count{};
  int used = 0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    const TrialResult& t = results[r];
    if (t.flagged) {
      m.flagged += 1;
      continue;
    }
    used += 1;
    correct.add(trial_correct(t, plan.scenario) ? 1.0 : 0.0);
    dur.add(t.duration_weeks);
    pat.add(t.n_patients);
    for (int j = 0; j < levels; ++j) alloc[j].add(t.allocations[j]);
    for (StopReason s : t.stop_reasons) stop_count[stop_reason_index(s)] += 1;

    PatientStream stream(plan.seed, r, plan.trial.max_patients);
    if (stream.stream_hash() != t.stream_hash)
      throw std::logic_error("summarize: latent stream differs from the trial's record");
    if (plan.scenario.truth == ScenarioSpec::Truth::kDose) {
      int pick = benchmark_select(stream, plan.scenario, plan.trial.cycles, plan.trial.tau);
      bench.add(pick == plan.scenario.mtd_level ? 1.0 : 0.0);
    }
  }
  if (used == 0) return m;

  m.pcs = correct.sum / used;
  m.benchmark_pcs = bench.sum / used;
  m.mean_duration = dur.sum / used;
  m.mean_patients = pat.sum / used;
  for (int j = 0; j < levels; ++j) m.mean_allocations[j] = alloc[j].sum / used;
  for (int i = 0; i < kStopReasonCount; ++i)
    m.stop_percent[i] = 100.0 * static_cast<double>(stop_count[i]) / used;

  if (used > 1) {
    KahanSum dur2, pat2;
    for (const TrialResult& t : results) {
      if (t.flagged) continue;
      double dd = t.duration_weeks - m.mean_duration;
      double dp = t.n_patients - m.mean_patients;
      dur2.add(dd * dd);
      pat2.add(dp * dp);
    }
    m.sd_duration = std::sqrt(dur2.sum / (used - 1));
    m.sd_patients = std::sqrt(pat2.sum / (used - 1));
  }
  return m;
}

StudyMetrics run_study(const StudyPlan& plan, int threads) {
  return summarize(plan, run_replications(plan, threads));
}

double geometric_mean_pcs(const std::vector<double>& pcs) {
  if (pcs.empty()) throw std::invalid_argument("geometric_mean_pcs: empty input");
  double log_sum = 0.0;
  for (double p : pcs) {
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return std::exp(log_sum / static_cast<double>(pcs.size()));
}

CalibrationReport calibrate(DesignKind kind, const std::vector<DesignSettings>& grid,
                            const std::vector<ScenarioSpec>& scenarios, const RuleConfig& rules,
                            const TrialConfig& trial, int replications, std::uint64_t seed,
                            int threads) {
  if (grid.empty()) throw std::invalid_argument("calibrate: empty hyper-parameter grid");
  if (scenarios.empty()) throw std::invalid_argument("calibrate: no scenarios");
  CalibrationReport report;
  for (const auto& sc : scenarios) report.scenario_labels.push_back(sc.label);

  std::vector<std::vector<double>> pcs_by_point;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> pcs(scenarios.size(), 0.0);
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      StudyPlan plan{scenarios[s], kind, grid[g], rules, trial, replications, seed};
      pcs[s] = run_study(plan, threads).pcs;
    }
    double objective = geometric_mean_pcs(pcs);
    report.objectives.push_back(objective);
    pcs_by_point.push_back(std::move(pcs));
    if (report.best_index < 0 || objective > report.objectives[report.best_index])
      report.best_index = static_cast<int>(g);
  }
  report.best = grid[report.best_index];
  report.objective = report.objectives[report.best_index];
  report.scenario_pcs = pcs_by_point[report.best_index];
  auto design = make_design(kind, report.best);
  report.ess_diagnostic = ess_diagnostic(*design, scenarios.front().dose_grid, trial);
  return report;
}

std::vector<double> ess_diagnostic(const Design& design, const DoseGrid& grid,
                                   const TrialConfig& trial) {
  TrialState empty;
  DesignContext ctx{&grid, &trial, rng::hash_key(rng::kDesignFit, std::uint64_t{0xe55})};
  const int levels = grid.levels();
  const int nodes = 200;
  std::vector<double> ess(levels, 0.0);
  for (int j = 0; j < levels; ++j) {
    // midpoint integrals of the prior survival curve of the cycle-1 risk:
    // E[p] = int_0^1 P(p > t) dt, E[p^2] = int_0^1 2 t P(p > t) dt
    double mean = 0.0, second = 0.0;
    for (int k = 0; k < nodes; ++k) {
      double t = (k + 0.5) / nodes;
      double tail = design.prob_cycle1_above(empty, ctx, j, t);
      mean += tail;
      second += 2.0 * t * tail;
    }
    mean /= nodes;
    second /= nodes;
    double var = std::max(second - mean * mean, 1e-12);
    ess[j] = mean * (1.0 - mean) / var - 1.0;
  }
  return ess;
}

}  // namespace escalate
