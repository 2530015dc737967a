#include "escalate/interval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "escalate/stats.hpp"

namespace escalate {

void IntervalConfig::validate() const {
  if (!(0.0 < tau1 && tau1 < tau2 && tau2 < 1.0))
    throw std::invalid_argument("interval bounds need 0 < tau1 < tau2 < 1");
  if (eps1 <= 0.0 || eps2 <= 0.0) throw std::invalid_argument("key half-widths must be positive");
  if (std::fabs(eps1 + eps2 - (tau2 - tau1)) > 1e-9)
    throw std::invalid_argument("key width eps1+eps2 must equal tau2-tau1");
  if (prior_alpha <= 0.0 || prior_beta <= 0.0) throw std::invalid_argument("Beta prior must be positive");
}

const char* to_string(Action a) {
  switch (a) {
    case Action::kEscalate: return "escalate";
    case Action::kStay: return "stay";
    case Action::kDeescalate: return "de-escalate";
  }
  return "?";
}

double DoseSnapshot::effective_n() const {
  double n = n_complete;
  for (double f : pending_fractions) n += f;
  return n;
}

void DoseSnapshot::validate() const {
  if (n_complete < 0 || m_dlt < 0 || n_pending < 0) throw std::invalid_argument("negative snapshot counts");
  if (static_cast<int>(pending_fractions.size()) != n_pending)
    throw std::invalid_argument("pending fraction count mismatch");
  if (m_dlt > n_complete + n_pending) throw std::invalid_argument("more DLTs than patients");
  for (double f : pending_fractions)
    if (f < 0.0 || f >= 1.0) throw std::invalid_argument("pending fractions must be in [0,1)");
}

DoseSnapshot snapshot_at(const TrialState& state, int level, int cycles) {
  DoseSnapshot snap;
  for (const auto& p : state.patients) {
    if (p.dose_level != level) continue;
    if (p.off_study) {
      ++snap.n_complete;
      ++snap.m_dlt;
    } else if (p.cycles_observed() >= cycles) {
      ++snap.n_complete;
    } else {
      ++snap.n_pending;
      snap.pending_fractions.push_back(double(p.cycles_observed()) / cycles);
    }
  }
  return snap;
}

std::pair<double, double> boin_boundaries(double tau1, double tau2, double tau) {
  if (!(tau1 < tau && tau < tau2)) throw std::invalid_argument("need tau1 < tau < tau2");
  double lambda_e =
      std::log((1.0 - tau1) / (1.0 - tau)) / std::log(tau * (1.0 - tau1) / (tau1 * (1.0 - tau)));
  double lambda_d =
      std::log((1.0 - tau) / (1.0 - tau2)) / std::log(tau2 * (1.0 - tau) / (tau * (1.0 - tau2)));
  return {lambda_e, lambda_d};
}

Action tite_boin_decide(const DoseSnapshot& snap, std::pair<double, double> boundaries) {
  snap.validate();
  if (snap.treated() == 0) return Action::kStay;
  // decisions wait until the follow-up-weighted sample covers at least half
  // of the treated patients
  double n_eff = snap.effective_n();
  if (2.0 * n_eff + 1e-9 < static_cast<double>(snap.treated())) return Action::kStay;
  if (n_eff <= 0.0) return Action::kStay;
  double p_hat = snap.m_dlt / n_eff;
  if (p_hat <= boundaries.first) return Action::kEscalate;
  if (p_hat >= boundaries.second) return Action::kDeescalate;
  return Action::kStay;
}

namespace {

// Keys tile [0,1] with width tau2-tau1; index 0 is the target key, negative
// indices sit below it. Returns the modal index under Beta(a,b).
int modal_key(double a, double b, const IntervalConfig& cfg) {
  double width = cfg.eps1 + cfg.eps2;
  struct Key {
    int index;
    double mass;
  };
  std::vector<Key> keys;
  int low_count = static_cast<int>(std::ceil(cfg.tau1 / width - 1e-12));
  for (int k = -low_count; ; ++k) {
    double lo = cfg.tau1 + k * width;
    double hi = lo + width;
    double clo = std::max(0.0, lo), chi = std::min(1.0, hi);
    if (chi <= 0.0) continue;
    keys.push_back({k, stats::beta_cdf(a, b, chi) - stats::beta_cdf(a, b, clo)});
    if (hi >= 1.0) break;
  }
  double best = -1.0;
  for (const auto& key : keys) best = std::max(best, key.mass);
  std::vector<int> modal;
  for (const auto& key : keys)
    if (key.mass >= best - 1e-12) modal.push_back(key.index);
  // target key among the modes, or modes straddling it, resolve to stay
  int nearest = modal.front();
  for (int idx : modal) {
    if (idx == 0) return 0;
    if (std::abs(idx) < std::abs(nearest)) nearest = idx;
  }
  for (int idx : modal)
    if (idx == -nearest) return 0;
  return nearest;
}

}  // namespace

Action keyboard_decide(const DoseSnapshot& snap, const IntervalConfig& cfg) {
  snap.validate();
  cfg.validate();
  double n_eff = snap.effective_n();
  if (n_eff <= 0.0) return Action::kStay;
  double a = cfg.prior_alpha + snap.m_dlt;
  double b = cfg.prior_beta + std::max(0.0, n_eff - snap.m_dlt);
  int key = modal_key(a, b, cfg);
  if (key < 0) return Action::kEscalate;
  if (key > 0) return Action::kDeescalate;
  return Action::kStay;
}

RollingDecision rmtpi2_decide(const DoseSnapshot& snap, const IntervalConfig& cfg, int consecutive,
                              int consecutive_cap) {
  snap.validate();
  DoseSnapshot complete{snap.n_complete, snap.m_dlt, 0, {}};
  Action d_complete = keyboard_decide(complete, cfg);
  if (snap.n_pending == 0) return {d_complete, false};
  DoseSnapshot best{snap.n_complete + snap.n_pending, snap.m_dlt, 0, {}};
  DoseSnapshot worst{snap.n_complete + snap.n_pending, snap.m_dlt + snap.n_pending, 0, {}};
  Action d_best = keyboard_decide(best, cfg);
  Action d_worst = keyboard_decide(worst, cfg);
  if (d_best == d_worst) return {d_best, false};
  if (consecutive >= consecutive_cap) return {d_complete, false};
  return {Action::kStay, true};
}

Action DecisionTable::lookup(const DoseSnapshot& snap, bool capped) const {
  int thirds = rule == Rule::kRolling
                   ? -1
                   : static_cast<int>(std::lround((snap.effective_n() - snap.n_complete) * cycles));
  int cap_key = rule == Rule::kRolling ? (capped ? 1 : 0) : -1;
  Row probe{snap.n_complete, snap.m_dlt, snap.n_pending, thirds, cap_key, Action::kStay};
  auto cmp = [](const Row& a, const Row& b) {
    return std::tie(a.n_complete, a.m_dlt, a.n_pending, a.thirds, a.capped) <
           std::tie(b.n_complete, b.m_dlt, b.n_pending, b.thirds, b.capped);
  };
  auto it = std::lower_bound(rows.begin(), rows.end(), probe, cmp);
  if (it == rows.end() || cmp(probe, *it)) throw std::out_of_range("state not in decision table");
  return it->action;
}

void DecisionTable::to_csv(std::ostream& os) const {
  os << "n_complete,m_dlt,n_pending,pending_thirds,capped,action\n";
  for (const auto& r : rows)
    os << r.n_complete << ',' << r.m_dlt << ',' << r.n_pending << ',' << r.thirds << ',' << r.capped << ','
       << to_string(r.action) << '\n';
}

DecisionTable build_decision_table(DecisionTable::Rule rule, const IntervalConfig& cfg, double tau,
                                   int cycles, int max_patients, int consecutive_cap) {
  DecisionTable table;
  table.rule = rule;
  table.cycles = cycles;
  std::pair<double, double> boundaries{0.0, 1.0};
  if (rule == DecisionTable::Rule::kBoin) boundaries = boin_boundaries(cfg.tau1, cfg.tau2, tau);
  for (int nc = 0; nc <= max_patients; ++nc) {
    for (int m = 0; m <= nc; ++m) {
      for (int np = 0; nc + np <= max_patients; ++np) {
        if (rule == DecisionTable::Rule::kRolling) {
          DoseSnapshot snap{nc, m, np, std::vector<double>(np, 1.0 / cycles)};
          for (int capped = 0; capped <= 1; ++capped) {
            auto rd = rmtpi2_decide(snap, cfg, capped ? consecutive_cap : 0, consecutive_cap);
            table.rows.push_back({nc, m, np, -1, capped, rd.action});
          }
          continue;
        }
        int lo_thirds = np, hi_thirds = np * (cycles - 1);
        if (np == 0) lo_thirds = hi_thirds = 0;
        for (int thirds = lo_thirds; thirds <= hi_thirds; ++thirds) {
          // reconstruct any fraction multiset with this total follow-up
          std::vector<double> fr(np, 1.0 / cycles);
          int extra = thirds - np;
          for (int i = 0; i < np && extra > 0; ++i) {
            int add = std::min(extra, cycles - 2);
            fr[i] += double(add) / cycles;
            extra -= add;
          }
          DoseSnapshot snap{nc, m, np, fr};
          Action act = rule == DecisionTable::Rule::kBoin ? tite_boin_decide(snap, boundaries)
                                                          : keyboard_decide(snap, cfg);
          table.rows.push_back({nc, m, np, np == 0 ? 0 : thirds, -1, act});
        }
      }
    }
  }
  auto cmp = [](const DecisionTable::Row& a, const DecisionTable::Row& b) {
    return std::tie(a.n_complete, a.m_dlt, a.n_pending, a.thirds, a.capped) <
           std::tie(b.n_complete, b.m_dlt, b.n_pending, b.thirds, b.capped);
  };
  std::sort(table.rows.begin(), table.rows.end(), cmp);
  return table;
}

int assisted_final_mtd(const std::vector<std::pair<int, int>>& n_m_per_dose, const IntervalConfig& cfg,
                       double tau, const std::set<int>& excluded) {
  std::vector<int> levels;
  std::vector<double> mean, weight;
  for (int j = 0; j < static_cast<int>(n_m_per_dose.size()); ++j) {
    auto [n, m] = n_m_per_dose[j];
    if (n <= 0) continue;
    levels.push_back(j);
    mean.push_back((cfg.prior_alpha + m) / (cfg.prior_alpha + cfg.prior_beta + n));
    weight.push_back(n + cfg.prior_alpha + cfg.prior_beta);
  }
  if (levels.empty()) return -1;
  std::vector<double> iso = stats::pava_isotonic(mean, weight);
  int best = -1;
  double best_gap = 2.0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (excluded.count(levels[k])) continue;
    // the tiny level-ordered offset breaks pooled ties toward the target:
    // tied estimates below tau resolve to the higher dose, above tau to the
    // lower one
    double gap = std::fabs(iso[k] + 1e-10 * levels[k] - tau);
    if (gap < best_gap) {
      best_gap = gap;
      best = levels[k];
    }
  }
  return best;
}

}  // namespace escalate
