#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "escalate/designs.hpp"
#include "escalate/rules.hpp"

// Single-trial execution, replicated studies under common random numbers,
// and the hyper-parameter grid search.

namespace escalate {

struct StudyPlan {
  ScenarioSpec scenario;
  DesignKind design = DesignKind::kTiteCrm;
  DesignSettings settings = DesignSettings::defaults(2);
  RuleConfig rules;
  TrialConfig trial;
  int replications = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr int kStopReasonCount = 6;
inline int stop_reason_index(StopReason r) { return static_cast<int>(r); }

struct TrialResult {
  std::optional<int> recommendation;
  double duration_weeks = 0.0;
  int n_patients = 0;
  std::vector<int> allocations;         // patients treated per dose level
  std::vector<StopReason> stop_reasons; // sorted, no duplicates
  int n_dlt = 0;
  bool flagged = false;          // engine raised mid-trial; dropped from metrics
  std::uint64_t stream_hash = 0; // latent-stream hash, equal across designs

  bool stopped_for(StopReason r) const;
};

/// One per-cycle decision as the simulator saw it: enforcement actions, the
/// raw engine proposal, the filtered assignment and any stopping rules.
struct DecisionTrace {
  int clock = 0;              // cycles elapsed when the decision was made
  bool new_exclusion = false; // hard-safety enforcement acted this cycle
  DoseDecision raw;           // engine output before the filters
  int assigned = -1;          // dose for the next cohort; -1 when the engine stops
  std::vector<StopReason> stops;
  std::vector<double> prob_above; // per-dose cycle-1 exceedance (rule 2/3 edges)
  std::optional<double> cv;       // precision-rule coefficient of variation
};

/// Patient histories and the decision trail behind one TrialResult; enough
/// to replay every in-trial decision from a written log.
struct TrialLog {
  std::vector<PatientRecord> patients;
  std::vector<DecisionTrace> decisions;
};

/// Runs the enforcement + engine + stopping pipeline once on the current
/// state (mutates exclusions). Shared by the simulator and decision replay.
DecisionTrace decide_next(TrialState& state, const Design& design, const DesignContext& ctx,
                          const TrialConfig& trial, const RuleConfig& rules);

/// Context key for the decision taken `clock` cycles in; clock 0 is the
/// final fit after follow-up completes.
std::uint64_t decision_fit_key(std::uint64_t seed, int replication, int clock);

TrialResult run_trial(const StudyPlan& plan, int replication, TrialLog* log = nullptr);
/// Same loop with a caller-supplied engine.
TrialResult run_trial_with(const StudyPlan& plan, int replication, const Design& design,
                           TrialLog* log = nullptr);

/// Every replication of the plan, indexed by replication number. `threads`
/// <= 0 takes the OpenMP default; results are identical for any thread count.
std::vector<TrialResult> run_replications(const StudyPlan& plan, int threads = 0,
                                          std::vector<TrialLog>* logs = nullptr);
/// Plain-loop reference for the parallel path.
std::vector<TrialResult> run_replications_serial(const StudyPlan& plan,
                                                 std::vector<TrialLog>* logs = nullptr);

struct StudyMetrics {
  int replications = 0;
  int flagged = 0; // excluded from every aggregate below
  double pcs = 0.0;
  double benchmark_pcs = 0.0;
  double mean_duration = 0.0, sd_duration = 0.0;
  double mean_patients = 0.0, sd_patients = 0.0;
  std::vector<double> mean_allocations;
  std::array<double, kStopReasonCount> stop_percent{}; // co-triggers can push the sum past 100
};

/// Correct-outcome test: recommended the true MTD; or, in an all-unsafe
/// scenario, ended with no recommendation through LowestUnsafe/HardSafety;
/// or, in an all-safe scenario, triggered HighestVerySafe.
bool trial_correct(const TrialResult& result, const ScenarioSpec& scenario);

StudyMetrics summarize(const StudyPlan& plan, const std::vector<TrialResult>& results);
StudyMetrics run_study(const StudyPlan& plan, int threads = 0);

struct CalibrationReport {
  int best_index = -1;
  DesignSettings best;
  double objective = 0.0; // geometric mean of per-scenario PCS
  std::vector<std::string> scenario_labels;
  std::vector<double> scenario_pcs;   // at the best grid point
  std::vector<double> objectives;     // one per grid point, grid order
  std::vector<double> ess_diagnostic; // per dose, Beta-matched prior ESS
};

/// (prod pcs)^(1/k); zero whenever any entry is zero or negative.
double geometric_mean_pcs(const std::vector<double>& pcs);

/// Grid search over hyper-configurations: each point is scored by the
/// geometric mean of its per-scenario PCS (any zero PCS zeroes the whole
/// objective); ties resolve to the earliest grid point.
CalibrationReport calibrate(DesignKind kind, const std::vector<DesignSettings>& grid,
                            const std::vector<ScenarioSpec>& scenarios, const RuleConfig& rules,
                            const TrialConfig& trial, int replications, std::uint64_t seed,
                            int threads = 0);

/// Effective sample size per dose implied by the engine's prior-predictive
/// cycle-1 exceedance curve, via moment matching to a Beta distribution.
std::vector<double> ess_diagnostic(const Design& design, const DoseGrid& grid,
                                   const TrialConfig& trial);

}  // namespace escalate
