#include "escalate/patient_sim.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace escalate {

double CycleRiskLadder::hazard(int s) const {
  if (s < 1 || s > static_cast<int>(p.size())) throw std::invalid_argument("cycle out of range");
  double prev = cumulative(s - 1);
  return (p[s - 1] - prev) / (1.0 - prev);
}

CycleRiskLadder cumulative_dlt_prob(double p1, int cycles) {
  if (p1 < 0.0 || p1 > 1.0) throw std::invalid_argument("p1 must be in [0,1]");
  if (cycles < 1) throw std::invalid_argument("cycles must be positive");
  CycleRiskLadder ladder;
  ladder.p.resize(cycles);
  double surv = 1.0, h = p1;
  for (int s = 0; s < cycles; ++s) {
    surv *= 1.0 - h;
    ladder.p[s] = 1.0 - surv;
    h /= 3.0;
  }
  return ladder;
}

void ScenarioSpec::validate() const {
  dose_grid.validate();
  if (p1.size() != dose_grid.values.size())
    throw std::invalid_argument("scenario needs one cycle-1 DLT probability per dose");
  double prev = -1.0;
  for (double v : p1) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("cycle-1 DLT probability out of range");
    if (v < prev) throw std::invalid_argument("cycle-1 DLT probabilities must be non-decreasing");
    prev = v;
  }
  if (truth == Truth::kDose && (mtd_level < 0 || mtd_level >= static_cast<int>(p1.size())))
    throw std::invalid_argument("MTD level out of range");
}

void ScenarioSpec::derive_truth(double tau, int cycles) {
  int best = -1;
  for (int j = 0; j < static_cast<int>(p1.size()); ++j) {
    if (ladder(j, cycles).whole_period() <= tau + 1e-9) best = j;
  }
  if (best < 0) {
    truth = Truth::kAllUnsafe;
    mtd_level = 0;
  } else {
    truth = Truth::kDose;
    mtd_level = best;
  }
}

std::array<double, 5> grade_category_probs(double p1) {
  if (p1 < 0.0 || p1 > 1.0) throw std::invalid_argument("p1 must be in [0,1]");
  std::array<double, 5> g{};
  g[4] = p1 / 2.0;
  g[3] = p1 / 2.0;
  g[2] = p1 > 0.5 ? 1.0 - p1 : p1;
  if (p1 <= 0.4)
    g[1] = p1 / 2.0;
  else if (p1 < 0.5)
    g[1] = 1.0 - 2.0 * p1;
  else
    g[1] = 0.0;
  g[0] = 1.0 - g[1] - g[2] - g[3] - g[4];
  if (g[0] < 0.0 && g[0] > -1e-12) g[0] = 0.0;
  return g;
}

int cycle_outcome(double z, const CycleRiskLadder& ladder, int s) {
  if (z <= 0.0 || z >= 1.0) throw std::invalid_argument("z must be in (0,1)");
  double v = 1.0 - z;
  if (v < ladder.cumulative(s - 1)) throw std::invalid_argument("patient already had a DLT before this cycle");
  return v < ladder.cumulative(s) ? 1 : 0;
}

int max_grade_outcome(double z, const CycleRiskLadder& ladder, int s) {
  if (z <= 0.0 || z >= 1.0) throw std::invalid_argument("z must be in (0,1)");
  double base = ladder.cumulative(s - 1);
  double v = 1.0 - z;
  if (v < base) throw std::invalid_argument("patient already had a DLT before this cycle");
  // Conditional category probabilities at this cycle's hazard, rescaled to
  // the at-risk mass and stacked grade 4 first so the DLT band [base, p_s)
  // is exactly the grade >= 3 region.
  std::array<double, 5> g = grade_category_probs(ladder.hazard(s));
  double scale = 1.0 - base;
  double hi = base;
  for (int grade = 4; grade >= 1; --grade) {
    hi += scale * g[grade];
    if (v < hi) return grade;
  }
  return 0;
}

std::array<int, 3> type_grade_combo(int max_grade, double aux) {
  if (max_grade < 0 || max_grade > 4) throw std::invalid_argument("max grade out of range");
  if (aux < 0.0 || aux >= 1.0) throw std::invalid_argument("aux must be in [0,1)");
  int m = max_grade;
  int count = (m + 1) * (m + 1) * (m + 1) - m * m * m;
  int pick = static_cast<int>(aux * count);
  if (pick >= count) pick = count - 1;
  for (int g1 = 0; g1 <= m; ++g1)
    for (int g2 = 0; g2 <= m; ++g2)
      for (int g3 = 0; g3 <= m; ++g3) {
        if (g1 != m && g2 != m && g3 != m) continue;
        if (pick-- == 0) return {g1, g2, g3};
      }
  throw std::logic_error("type-grade enumeration exhausted");
}

void NttpWeights::validate() const {
  for (const auto& row : w) {
    if (row[0] != 0.0) throw std::invalid_argument("grade-0 weight must be zero");
    for (int g = 1; g < 5; ++g)
      if (row[g] < row[g - 1]) throw std::invalid_argument("weights must be non-decreasing in grade");
  }
  if (norm() <= 0.0) throw std::invalid_argument("weights cannot be all zero");
}

double NttpWeights::norm() const {
  double ss = 0.0;
  for (const auto& row : w) ss += row[4] * row[4];
  return std::sqrt(ss);
}

NttpWeights NttpWeights::standard() {
  NttpWeights weights;
  weights.w = {{{0.0, 0.5, 0.75, 1.0, 1.5},
                {0.0, 0.5, 0.75, 1.0, 1.5},
                {0.0, 0.25, 0.5, 0.75, 1.0}}};
  return weights;
}

double nttp_value(const std::array<int, 3>& grades, const NttpWeights& weights) {
  double ss = 0.0;
  for (int l = 0; l < 3; ++l) {
    int g = grades[l];
    if (g < 0 || g > 4) throw std::invalid_argument("grade out of range");
    ss += weights.w[l][g] * weights.w[l][g];
  }
  return std::sqrt(ss) / weights.norm();
}

double expected_nttp_cycle1(double p1, const NttpWeights& weights) {
  std::array<double, 5> cat = grade_category_probs(p1);
  double total = 0.0;
  for (int m = 0; m <= 4; ++m) {
    if (cat[m] <= 0.0) continue;
    double sum = 0.0;
    int count = 0;
    for (int g1 = 0; g1 <= m; ++g1)
      for (int g2 = 0; g2 <= m; ++g2)
        for (int g3 = 0; g3 <= m; ++g3) {
          if (g1 != m && g2 != m && g3 != m) continue;
          sum += nttp_value({g1, g2, g3}, weights);
          ++count;
        }
    total += cat[m] * sum / count;
  }
  return total;
}

PatientStream::PatientStream(std::uint64_t seed, std::uint64_t replication, int max_patients)
    : seed_(seed), replication_(replication) {
  if (max_patients < 1) throw std::invalid_argument("max_patients must be positive");
  z_.resize(max_patients);
  for (int i = 0; i < max_patients; ++i)
    z_[i] = rng::hash_u01(seed, rng::kPatientZ, replication, static_cast<std::uint64_t>(i));
}

std::uint64_t PatientStream::stream_hash() const {
  std::uint64_t h = rng::hash_key(seed_, replication_);
  for (double v : z_) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    h = rng::hash_one(h, bits);
  }
  return h;
}

CycleOutcome generate_outcome(const PatientStream& stream, int patient, const CycleRiskLadder& ladder,
                              int cycle) {
  CycleOutcome out;
  out.max_grade = max_grade_outcome(stream.z(patient), ladder, cycle);
  out.dlt = out.max_grade >= 3 ? 1 : 0;
  out.type_grades = type_grade_combo(out.max_grade, stream.combo_aux(patient, cycle));
  return out;
}

int benchmark_select(const PatientStream& stream, const ScenarioSpec& scenario, int cycles, double target) {
  int levels = scenario.dose_grid.levels();
  int best = 0;
  double best_gap = 2.0;
  for (int j = 0; j < levels; ++j) {
    double whole = scenario.ladder(j, cycles).whole_period();
    double mean = 0.0;
    for (int i = 0; i < stream.size(); ++i) mean += (1.0 - stream.z(i) < whole) ? 1.0 : 0.0;
    mean /= stream.size();
    double gap = std::fabs(mean - target);
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      best = j;
    }
  }
  return best;
}

}  // namespace escalate
