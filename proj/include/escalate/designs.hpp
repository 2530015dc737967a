#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "escalate/interval.hpp"
#include "escalate/linalg.hpp"
#include "escalate/patient_sim.hpp"
#include "escalate/quadrature.hpp"
#include "escalate/trial.hpp"

// The eight escalation engines behind one interface. Engines are pure
// functions of the trial state; every stochastic fit is keyed through the
// context so decisions are reproducible and thread-independent.

namespace escalate {

enum class DesignKind {
  kTiteCrm,
  kTiteCrm2,
  kIcsdp,
  kPomm,
  kNttp,
  kTiteBoin,
  kTiteMtpi2,
  kRollingMtpi2,
};

const char* to_string(DesignKind k);
std::optional<DesignKind> design_from_string(const std::string& name);
std::vector<DesignKind> all_design_kinds();

struct TiteCrmConfig {
  std::vector<double> skeleton = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  double sigma2 = 1.0;
  void validate(int levels) const;
};

struct TiteCrm2Config {
  double mu_a0 = -1.0;
  double var_a0 = 10.0 / 3.0;       // precision 0.3
  double mu_loga1 = -1.6094379124341003;  // log 0.2
  double var_loga1 = 10.0 / 3.0;
  int burnin = 1000;
  int iterations = 2000;
  void validate() const;
};

struct IcsdpConfig {
  double pi_star_1 = 0.2;
  double pi_star_J = 0.4;
  double n0 = 6.0;
  double cycle_decay = 1.0 / 3.0;  // decrease of pseudo conditional rates per cycle
  void validate() const;
};

struct PommConfig {
  std::vector<double> p1_star = {0.15, 0.20, 0.25, 0.30, 0.35, 0.40};
  double n0 = 2.0;
  std::vector<double> grade2_ratio = {0.20, 0.30, 0.40, 0.50, 0.60};
  int switch_n = 15;  // last subject count using the cycle-1 logistic
  void validate(int levels) const;
};

struct NttpConfig {
  std::array<double, 3> prior_mean = {0.1, 0.5, 0.0};
  std::array<double, 3> prior_var = {100.0, 100.0, 10.0};
  NttpWeights weights = NttpWeights::standard();
  double tau_nttp = 0.0;  // <= 0: derived from the weights at the cycle-1 target
  int burnin = 500;
  int iterations = 1500;
  void validate() const;
};

struct DesignSettings {
  TiteCrmConfig crm;
  TiteCrm2Config crm2;
  IcsdpConfig icsdp;
  PommConfig pomm;
  NttpConfig nttp;
  IntervalConfig boin{.tau1 = 0.3128, .tau2 = 0.5083, .prior_alpha = 0.1, .prior_beta = 0.9};
  IntervalConfig mtpi2{.tau1 = 0.3519, .tau2 = 0.5474, .prior_alpha = 1.0, .prior_beta = 1.0};
  int rolling_consecutive_cap = 6;

  static DesignSettings defaults(int setting);
};

struct DesignContext {
  const DoseGrid* grid = nullptr;
  const TrialConfig* cfg = nullptr;
  std::uint64_t fit_key = 0;
};

class Design {
 public:
  virtual ~Design() = default;
  virtual std::string name() const = 0;

  /// Dose proposal for the next cohort; k-fold clipping and stopping
  /// evaluation are the caller's job, exclusions are respected here.
  virtual DoseDecision propose(const TrialState& state, const DesignContext& ctx) const = 0;

  /// Final recommendation after all follow-up has completed.
  virtual std::optional<int> recommend(const TrialState& state, const DesignContext& ctx) const = 0;

  /// P(cycle-1 DLT probability at `level` exceeds tau1 | data); defaults to
  /// the Beta(1,1)-binomial on observed cycle-1 outcomes at that dose.
  virtual double prob_cycle1_above(const TrialState& state, const DesignContext& ctx, int level,
                                   double tau1) const;

  /// Posterior draws of the continuous dose hitting the target, for the
  /// precision stopping rule; empty when the design has no dose-response
  /// model (the model-assisted family).
  virtual std::vector<double> mtd_draws(const TrialState&, const DesignContext&) const { return {}; }

  virtual bool model_based() const { return true; }
};

std::unique_ptr<Design> make_design(DesignKind kind, const DesignSettings& settings);

/// Adjusted-MAD coefficient of variation of the draws:
/// 1.4826 * MAD / median. Non-finite draws or a non-positive median give
/// +infinity (the precision rule then cannot fire).
double mtd_cv(const std::vector<double>& draws);

// Fit internals shared with the test oracles.

/// One likelihood term of the weighted one-parameter model.
struct TiteObservation {
  double scaled_dose = 0.0;  // skeleton value (1-par) or MBq (2-par)
  double weight = 0.0;       // u/S, or 1 on DLT
  int y = 0;
};

/// Weighted observations from the trial history; cycle1_only restricts
/// follow-up to the first cycle (weight 1, cycle-1 DLT indicator).
std::vector<TiteObservation> tite_observations(const TrialState& state, const std::vector<double>& dose_value,
                                               int cycles, bool cycle1_only);

/// Posterior over beta for the one-parameter model on a fixed support.
quad::Posterior1D titecrm_posterior(const std::vector<TiteObservation>& obs, double sigma2, int nodes);

inline constexpr double kCrmSupport = 12.0;  // integration range for beta
inline constexpr int kCrmNodes = 4001;

struct IcsdpFit {
  std::vector<double> gamma;  // per cycle
  double theta = 0.0;
  std::vector<std::vector<double>> pi;   // fitted conditional rates [dose][cycle]
  std::vector<double> rho;               // whole-period risk per dose
  la::Matrix hessian_lower;              // Cholesky of the negative-log-posterior Hessian
};

/// MAP fit of the interval-censored survival model on observed + pseudo
/// counts (pseudo at the lowest and highest dose).
IcsdpFit icsdp_fit(const CycleCountTable& observed, const DoseGrid& grid, int cycles,
                   const IcsdpConfig& cfg);

struct Logistic2Fit {
  double b0 = 0.0, b1 = 0.0;
  la::Matrix hessian_lower;
  bool ok = false;
};

/// Weighted binary logistic MLE (Newton) for cycle-1 DLT vs dose.
Logistic2Fit logistic2_fit(const std::vector<std::array<double, 3>>& rows);  // (dose, y, weight)

struct PommPoFit {
  // alpha1, alpha2 = alpha1 + exp(delta), beta1, beta2, log sigma0
  std::vector<double> params;
  bool ok = false;
};

/// Structured view of the ordinal data the proportional-odds stage uses.
struct PommData {
  std::vector<std::vector<std::pair<int, int>>> subjects;  // per subject: (cycle, category 1..3)
  std::vector<double> dose;                                // per subject, MBq
};

PommData pomm_data(const TrialState& state, const DoseGrid& grid);

/// MAP fit of the proportional-odds mixed model with pseudo-data.
PommPoFit pomm_po_fit(const PommData& data, const PommConfig& cfg, const DoseGrid& grid, int cycles);

/// P(category 3) per cycle at u = 0 under fitted parameters.
double pomm_po_p3(const std::vector<double>& params, double dose, int cycle);

}  // namespace escalate
