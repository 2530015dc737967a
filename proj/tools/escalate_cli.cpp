// Command-line front end: simulate studies, score calibration grids, or ask
// for the next dose given a patient history. See README for the config
// schema and output formats.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "escalate/config.hpp"
#include "escalate/report.hpp"
#include "escalate/rules.hpp"

namespace esc = escalate;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> replications;
};

int resolve_threads(const Overrides& ov, const esc::StudyConfig& cfg) {
  if (ov.threads) return *ov.threads;
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("ESCALATE_THREADS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
      throw esc::ConfigError("ESCALATE_THREADS must be an integer");
    }
  }
  return 0;
}

esc::StudyConfig load_with_overrides(const std::string& path, const Overrides& ov) {
  esc::StudyConfig cfg = esc::load_study_config(path);
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.replications) {
    cfg.replications = *ov.replications;
    if (cfg.calibration) cfg.calibration->replications = *ov.replications;
  }
  if (cfg.replications < 1) throw esc::ConfigError("replications must be at least 1");
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);  // \n line ends on every platform
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

std::string dose_str(const esc::DoseGrid& grid, int level) {
  return "dose " + std::to_string(level + 1) + " (" + esc::format_number(grid[level]) + " MBq)";
}

int cmd_simulate(const esc::StudyConfig& cfg, int threads) {
  if (cfg.scenarios.empty() || cfg.designs.empty())
    throw esc::ConfigError("simulate needs scenario and design blocks");
  fs::create_directories(cfg.out_dir);
  std::vector<esc::StudyRow> rows;
  std::ofstream jsonl = open_out(fs::path(cfg.out_dir) / "results.jsonl");

  for (const esc::ScenarioSpec& sc : cfg.scenarios) {
    for (const esc::DesignChoice& d : cfg.designs) {
      esc::StudyPlan plan;
      plan.scenario = sc;
      plan.design = d.kind;
      plan.settings = d.settings;
      plan.rules = cfg.rules;
      plan.trial = cfg.trial;
      plan.replications = cfg.replications;
      plan.seed = cfg.seed;

      std::vector<esc::TrialLog> logs;
      std::vector<esc::TrialResult> results = esc::run_replications(plan, threads, &logs);
      esc::StudyMetrics m = esc::summarize(plan, results);
      rows.push_back({esc::to_string(d.kind), sc.label, cfg.rules.setting, m});

      for (int rep = 0; rep < plan.replications; ++rep) {
        esc::TrialRecord rec;
        rec.design = esc::to_string(d.kind);
        rec.scenario = sc.label;
        rec.seed = cfg.seed;
        rec.replication = rep;
        rec.patients = std::move(logs[rep].patients);
        rec.decisions = std::move(logs[rep].decisions);
        rec.result = results[rep];
        esc::write_record(jsonl, rec);
      }

      std::cout << esc::to_string(d.kind) << " / " << sc.label << ": pcs "
                << esc::format_number(m.pcs) << ", benchmark " << esc::format_number(m.benchmark_pcs)
                << ", " << esc::format_number(m.mean_duration) << " weeks, "
                << esc::format_number(m.mean_patients) << " patients";
      if (m.flagged > 0) std::cout << " [" << m.flagged << " flagged]";
      std::cout << '\n';
    }
  }

  { std::ofstream os = open_out(fs::path(cfg.out_dir) / "metrics.csv"); esc::write_metrics_csv(os, rows); }
  { std::ofstream os = open_out(fs::path(cfg.out_dir) / "allocations.csv"); esc::write_allocations_csv(os, rows); }
  { std::ofstream os = open_out(fs::path(cfg.out_dir) / "stops.csv"); esc::write_stops_csv(os, rows); }
  std::cout << "wrote metrics.csv, allocations.csv, stops.csv, results.jsonl to " << cfg.out_dir
            << '\n';
  return 0;
}

int cmd_next_dose(const esc::StudyConfig& cfg, const std::string& history_path) {
  if (cfg.designs.size() != 1)
    throw esc::ConfigError("next-dose needs a design block naming exactly one engine");
  const esc::DesignChoice& choice = cfg.designs.front();
  const esc::DoseGrid grid = cfg.scenarios.empty() ? esc::DoseGrid{esc::default_dose_grid()}
                                                   : cfg.scenarios.front().dose_grid;

  std::ifstream in(history_path);
  if (!in) throw esc::ConfigError("cannot open history file '" + history_path + "'");
  esc::TrialRecord hist = esc::read_history(in);
  if (hist.seed == 0) hist.seed = cfg.seed;
  for (const esc::PatientRecord& p : hist.patients) {
    if (p.dose_level < 0 || p.dose_level >= grid.levels())
      throw esc::ConfigError("history patient " + std::to_string(p.id) +
                             ": dose level outside the configured grid");
    if (static_cast<int>(p.outcomes.size()) > cfg.trial.cycles)
      throw esc::ConfigError("history patient " + std::to_string(p.id) +
                             ": more cycles than the follow-up window");
  }

  std::unique_ptr<esc::Design> design = esc::make_design(choice.kind, choice.settings);
  std::cout << "engine: " << design->name() << " (setting " << cfg.rules.setting << ")\n";

  if (hist.patients.empty()) {
    std::cout << "no patients on record; the first cohort starts at " << dose_str(grid, 0) << '\n';
    return 0;
  }

  esc::TrialState st = esc::reconstruct_state(hist.patients, -1, cfg.trial);
  int dlt = 0;
  for (const esc::PatientRecord& p : st.patients) dlt += p.off_study ? 1 : 0;
  std::cout << "clock: " << st.clock << " cycles ("
            << esc::format_number(st.clock * cfg.trial.cycle_weeks) << " weeks)\n";
  std::cout << "patients: " << st.enrolled() << " enrolled, " << dlt << " with a DLT\n";
  std::cout << "treated per dose:";
  for (int j = 0; j < grid.levels(); ++j) std::cout << ' ' << st.treated_at(j);
  std::cout << '\n';

  esc::DesignContext ctx{&grid, &cfg.trial,
                         esc::decision_fit_key(hist.seed, hist.replication, st.clock)};
  esc::DecisionTrace tr = esc::decide_next(st, *design, ctx, cfg.trial, cfg.rules);

  if (tr.new_exclusion) {
    std::cout << "hard safety: excluded";
    for (int j = 0; j < grid.levels(); ++j)
      if (st.excluded(j)) std::cout << ' ' << j + 1;
    std::cout << " and above\n";
  }
  switch (tr.raw.kind) {
    case esc::DoseDecision::Kind::kAssign:
      std::cout << "engine proposal: assign " << dose_str(grid, tr.raw.level) << '\n';
      break;
    case esc::DoseDecision::Kind::kStay:
      std::cout << "engine proposal: stay at " << dose_str(grid, st.current_dose) << '\n';
      break;
    case esc::DoseDecision::Kind::kStop:
      std::cout << "engine proposal: stop";
      for (esc::StopReason r : tr.raw.reasons) std::cout << ' ' << esc::to_string(r);
      std::cout << '\n';
      break;
  }
  if (tr.raw.kind != esc::DoseDecision::Kind::kStop) {
    int engine_level =
        tr.raw.kind == esc::DoseDecision::Kind::kAssign ? tr.raw.level : st.current_dose;
    int folded = esc::kfold_filter(engine_level, st, grid, cfg.rules);
    if (folded != engine_level)
      std::cout << "k-fold rule: capped to " << dose_str(grid, folded) << '\n';
    int clipped = esc::exclusion_clip(folded, st);
    if (clipped != folded) {
      if (clipped < 0)
        std::cout << "exclusions: every dose is barred\n";
      else
        std::cout << "exclusions: lowered to " << dose_str(grid, clipped) << '\n';
    }
  }

  if (cfg.rules.setting == 2) {
    if (st.treated_at(0) >= 1)
      std::cout << "P(p1 > " << esc::format_number(cfg.rules.tau_cycle1)
                << ") at dose 1: " << esc::format_number(tr.prob_above.front()) << '\n';
    if (st.treated_at(grid.levels() - 1) >= 1)
      std::cout << "P(p1 > " << esc::format_number(cfg.rules.tau_cycle1) << ") at dose "
                << grid.levels() << ": " << esc::format_number(tr.prob_above.back()) << '\n';
    if (tr.cv) std::cout << "precision cv: " << esc::format_number(*tr.cv) << '\n';
  }

  if (!tr.stops.empty()) {
    std::cout << "stopping rules triggered:";
    for (esc::StopReason r : tr.stops) std::cout << ' ' << esc::to_string(r);
    std::cout << '\n';
    bool unsafe = false, very_safe = false;
    for (esc::StopReason r : tr.stops) {
      unsafe |= r == esc::StopReason::kLowestUnsafe || r == esc::StopReason::kHardSafety;
      very_safe |= r == esc::StopReason::kHighestVerySafe;
    }
    if (unsafe) {
      std::cout << "recommendation: none (stopped for safety)\n";
    } else if (very_safe) {
      std::cout << "recommendation: " << dose_str(grid, grid.levels() - 1)
                << " (highest dose very safe)\n";
    } else {
      esc::DesignContext final_ctx{&grid, &cfg.trial,
                                   esc::decision_fit_key(hist.seed, hist.replication, 0)};
      int rec = design->recommend(st, final_ctx);
      if (rec < 0)
        std::cout << "recommendation: none\n";
      else
        std::cout << "recommendation: " << dose_str(grid, rec) << '\n';
    }
  } else if (tr.assigned >= 0) {
    std::cout << "next cohort: " << dose_str(grid, tr.assigned) << '\n';
  } else {
    std::cout << "trial stops: every dose is excluded; no recommendation\n";
  }
  return 0;
}

void describe_settings(std::ostream& os, esc::DesignKind kind, const esc::DesignSettings& s) {
  auto line = [&](const std::string& k, const std::string& v) { os << "  " << k << " = " << v << '\n'; };
  auto num = [&](const std::string& k, double v) { line(k, esc::format_number(v)); };
  auto vec = [&](const std::string& k, const std::vector<double>& v) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? " " : "") << esc::format_number(v[i]);
    line(k, ss.str());
  };
  switch (kind) {
    case esc::DesignKind::kTiteCrm:
      vec("crm.skeleton", s.crm.skeleton);
      num("crm.sigma2", s.crm.sigma2);
      break;
    case esc::DesignKind::kTiteCrm2:
      num("crm2.mu_a0", s.crm2.mu_a0);
      num("crm2.var_a0", s.crm2.var_a0);
      num("crm2.mu_loga1", s.crm2.mu_loga1);
      num("crm2.var_loga1", s.crm2.var_loga1);
      break;
    case esc::DesignKind::kIcsdp:
      num("icsdp.pi_star_1", s.icsdp.pi_star_1);
      num("icsdp.pi_star_J", s.icsdp.pi_star_J);
      num("icsdp.n0", s.icsdp.n0);
      break;
    case esc::DesignKind::kPomm:
      vec("pomm.p1_star", s.pomm.p1_star);
      num("pomm.n0", s.pomm.n0);
      break;
    case esc::DesignKind::kNttp:
      num("nttp.prior_mean[0]", s.nttp.prior_mean[0]);
      num("nttp.prior_mean[1]", s.nttp.prior_mean[1]);
      num("nttp.prior_mean[2]", s.nttp.prior_mean[2]);
      num("nttp.prior_var[0]", s.nttp.prior_var[0]);
      num("nttp.prior_var[1]", s.nttp.prior_var[1]);
      num("nttp.prior_var[2]", s.nttp.prior_var[2]);
      break;
    case esc::DesignKind::kTiteBoin:
      num("boin.tau1", s.boin.tau1);
      num("boin.tau2", s.boin.tau2);
      num("boin.prior_alpha", s.boin.prior_alpha);
      num("boin.prior_beta", s.boin.prior_beta);
      break;
    case esc::DesignKind::kTiteMtpi2:
    case esc::DesignKind::kRollingMtpi2:
      num("mtpi2.tau1", s.mtpi2.tau1);
      num("mtpi2.tau2", s.mtpi2.tau2);
      num("mtpi2.prior_alpha", s.mtpi2.prior_alpha);
      num("mtpi2.prior_beta", s.mtpi2.prior_beta);
      break;
  }
}

int cmd_calibrate(const esc::StudyConfig& cfg, int threads) {
  if (!cfg.calibration) throw esc::ConfigError("config has no calibrate block");
  const esc::CalibrationRequest& req = *cfg.calibration;
  esc::CalibrationReport rep = esc::calibrate(req.kind, req.grid, req.scenarios, cfg.rules,
                                              cfg.trial, req.replications, cfg.seed, threads);

  std::ostringstream os;
  os << "engine: " << esc::to_string(req.kind) << " (setting " << cfg.rules.setting << ")\n";
  os << "grid points: " << req.grid.size() << "; replications per scenario: " << req.replications
     << "; seed: " << cfg.seed << '\n';
  os << "objective (geometric mean PCS): " << esc::format_number(rep.objective) << '\n';
  os << "per-point objectives:\n";
  for (std::size_t g = 0; g < rep.objectives.size(); ++g) {
    os << "  [" << g << "] " << esc::format_number(rep.objectives[g]);
    if (static_cast<int>(g) == rep.best_index) os << "  <- best";
    os << '\n';
  }
  os << "scenario PCS at the best point:\n";
  for (std::size_t s = 0; s < rep.scenario_labels.size(); ++s)
    os << "  " << rep.scenario_labels[s] << "  " << esc::format_number(rep.scenario_pcs[s]) << '\n';
  os << "prior effective sample size by dose:";
  for (double e : rep.ess_diagnostic) os << ' ' << esc::format_number(e);
  os << '\n';
  os << "best hyper-parameters (index " << rep.best_index << "):\n";
  describe_settings(os, req.kind, rep.best);

  fs::create_directories(cfg.out_dir);
  fs::path out = fs::path(cfg.out_dir) / req.report;
  { std::ofstream f = open_out(out); f << os.str(); }
  std::cout << os.str();
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dose-escalation study simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string history_path;
  Overrides ov;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "study configuration file")->required();
    cmd->add_option("--out-dir", [&](const std::vector<std::string>& v) { ov.out_dir = v.back(); return true; },
                    "output directory override");
    cmd->add_option("--seed", [&](const std::vector<std::string>& v) { ov.seed = std::stoull(v.back()); return true; },
                    "seed override");
    cmd->add_option("--threads", [&](const std::vector<std::string>& v) { ov.threads = std::stoi(v.back()); return true; },
                    "worker thread override (0 = library default)");
    cmd->add_option("--replications", [&](const std::vector<std::string>& v) { ov.replications = std::stoi(v.back()); return true; },
                    "replication count override");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run every design x scenario of the config");
  add_common(simulate);
  CLI::App* next = app.add_subcommand("next-dose", "decide the next assignment for a history");
  add_common(next);
  next->add_option("--history", history_path, "patient history (JSON lines)")->required();
  CLI::App* calib = app.add_subcommand("calibrate", "score the configured hyper-parameter grid");
  add_common(calib);

  CLI11_PARSE(app, argc, argv);

  try {
    esc::StudyConfig cfg = load_with_overrides(config_path, ov);
    int threads = resolve_threads(ov, cfg);
    if (simulate->parsed()) return cmd_simulate(cfg, threads);
    if (next->parsed()) return cmd_next_dose(cfg, history_path);
    if (calib->parsed()) return cmd_calibrate(cfg, threads);
    return 2;
  } catch (const esc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
