#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "escalate/rng.hpp"
#include "escalate/trial.hpp"

// Latent-variable patient generator and the empirical optimal benchmark.
// A patient's uniform latent z determines every outcome on every dose and
// cycle, which is what makes common random numbers across designs possible.

namespace escalate {

/// Cumulative DLT probability through each cycle for one dose.
/// The per-cycle conditional hazard decreases by a factor of 3 per cycle:
/// h_s = p1 / 3^(s-1), p_s = 1 - prod_{k<=s} (1 - h_k).
struct CycleRiskLadder {
  std::vector<double> p;  // p[s-1] = P(DLT in cycles 1..s)

  double cumulative(int s) const { return s <= 0 ? 0.0 : p.at(s - 1); }
  double hazard(int s) const;  // conditional P(DLT in cycle s | no DLT before)
  double whole_period() const { return p.back(); }
};

CycleRiskLadder cumulative_dlt_prob(double p1, int cycles);

/// Scenario ground truth: per-dose cycle-1 DLT probabilities.
struct ScenarioSpec {
  std::string label;
  std::vector<double> p1;
  DoseGrid dose_grid;

  enum class Truth { kDose, kAllUnsafe, kAllSafe };
  Truth truth = Truth::kDose;
  int mtd_level = 0;  // valid when truth == kDose

  void validate() const;
  CycleRiskLadder ladder(int level, int cycles) const { return cumulative_dlt_prob(p1.at(level), cycles); }
  /// MTD = highest dose with whole-period risk at or below tau; all-unsafe
  /// when no dose qualifies. (All-safe is only ever set explicitly.)
  void derive_truth(double tau, int cycles);
};

/// P(grade g is the maximum observed grade in cycle 1) as a function of the
/// cycle-1 DLT probability; components sum to 1 and grades 3 and 4 carry
/// p1/2 each.
std::array<double, 5> grade_category_probs(double p1);

/// Binary DLT indicator for cycle s: 1 iff p_{s-1} < 1-z < p_s.
/// Rejects queries for cycles after an earlier DLT.
int cycle_outcome(double z, const CycleRiskLadder& ladder, int s);

/// Maximum observed grade in cycle s from the latent variable. Grade
/// intervals are stacked from p_{s-1} upward with grade 4 at the bottom,
/// widths scaled to the at-risk mass; the conditional category split uses
/// the cycle's hazard so that grade >= 3 coincides exactly with a DLT.
int max_grade_outcome(double z, const CycleRiskLadder& ladder, int s);

/// Uniform member of {(g1,g2,g3) in {0..maxg}^3 : max = maxg}; the set has
/// (m+1)^3 - m^3 elements.
std::array<int, 3> type_grade_combo(int max_grade, double aux);

/// Toxicity-type weights for the nTTP score, grades 0-4 per type.
struct NttpWeights {
  std::array<std::array<double, 5>, 3> w{};

  void validate() const;
  double norm() const;  // score of the all-grade-4 profile before normalisation

  /// Renal / haematological / neurological weights from the source method.
  static NttpWeights standard();
};

/// sqrt(sum_l W[l][g_l]^2) / v_norm, in [0,1].
double nttp_value(const std::array<int, 3>& grades, const NttpWeights& weights);

/// Expected cycle-1 nTTP under the generator at cycle-1 DLT probability p1;
/// used to derive the default nTTP target from the weights.
double expected_nttp_cycle1(double p1, const NttpWeights& weights);

/// Per-replication latent stream shared by all designs and the benchmark.
class PatientStream {
 public:
  PatientStream(std::uint64_t seed, std::uint64_t replication, int max_patients);

  double z(int patient) const { return z_.at(patient); }
  int size() const { return static_cast<int>(z_.size()); }

  /// Auxiliary uniform for type-grade selection, keyed per patient-cycle so
  /// the draw is identical no matter which design consumes it.
  double combo_aux(int patient, int cycle) const {
    return rng::hash_u01(seed_, rng::kComboAux, replication_, static_cast<std::uint64_t>(patient),
                         static_cast<std::uint64_t>(cycle));
  }

  /// Hash of the z values; equal across designs within a replication.
  std::uint64_t stream_hash() const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replication() const { return replication_; }

 private:
  std::uint64_t seed_, replication_;
  std::vector<double> z_;
};

/// Full outcome (grades + DLT flag) for one patient-cycle.
CycleOutcome generate_outcome(const PatientStream& stream, int patient, const CycleRiskLadder& ladder,
                              int cycle);

/// Empirical optimal benchmark: every patient's whole-period DLT indicator
/// is evaluated at every dose from z alone; picks the dose whose mean
/// response is closest to the target (lowest level on ties).
int benchmark_select(const PatientStream& stream, const ScenarioSpec& scenario, int cycles, double target);

}  // namespace escalate
