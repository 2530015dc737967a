#include "escalate/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

namespace escalate {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known |= it.key() == k;
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    std::int64_t i = v.get<std::int64_t>();
    if (i >= 0) return static_cast<std::uint64_t>(i);
  }
  fail(path, "expected a non-negative integer");
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_double_vector(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <typename T>
void set_if(const json& obj, const char* key, const std::string& path, T& field) {
  const json* v = find(obj, key);
  if (!v) return;
  if constexpr (std::is_same_v<T, double>)
    field = as_double(*v, path + "." + key);
  else if constexpr (std::is_same_v<T, int>)
    field = as_int(*v, path + "." + key);
  else if constexpr (std::is_same_v<T, std::vector<double>>)
    field = as_double_vector(*v, path + "." + key);
  else
    static_assert(sizeof(T) == 0, "unhandled field type");
}

void parse_interval(const json& obj, const std::string& path, IntervalConfig& cfg) {
  reject_unknown(obj, path, {"tau1", "tau2", "eps1", "eps2", "prior_alpha", "prior_beta"});
  set_if(obj, "tau1", path, cfg.tau1);
  set_if(obj, "tau2", path, cfg.tau2);
  set_if(obj, "eps1", path, cfg.eps1);
  set_if(obj, "eps2", path, cfg.eps2);
  set_if(obj, "prior_alpha", path, cfg.prior_alpha);
  set_if(obj, "prior_beta", path, cfg.prior_beta);
}

void apply_triplet(const json& v, const std::string& path, std::array<double, 3>& out) {
  std::vector<double> vals = as_double_vector(v, path);
  if (vals.size() != 3) fail(path, "expected exactly 3 numbers");
  for (int i = 0; i < 3; ++i) out[i] = vals[i];
}

/// Engine hyper-parameter overrides shared by the design block and the
/// calibration grid entries.
void parse_design_params(const json& obj, const std::string& path, DesignSettings& s) {
  if (const json* v = find(obj, "crm")) {
    const std::string p = path + ".crm";
    reject_unknown(*v, p, {"skeleton", "sigma2"});
    set_if(*v, "skeleton", p, s.crm.skeleton);
    set_if(*v, "sigma2", p, s.crm.sigma2);
  }
  if (const json* v = find(obj, "crm2")) {
    const std::string p = path + ".crm2";
    reject_unknown(*v, p, {"mu_a0", "var_a0", "mu_loga1", "var_loga1", "burnin", "iterations"});
    set_if(*v, "mu_a0", p, s.crm2.mu_a0);
    set_if(*v, "var_a0", p, s.crm2.var_a0);
    set_if(*v, "mu_loga1", p, s.crm2.mu_loga1);
    set_if(*v, "var_loga1", p, s.crm2.var_loga1);
    set_if(*v, "burnin", p, s.crm2.burnin);
    set_if(*v, "iterations", p, s.crm2.iterations);
  }
  if (const json* v = find(obj, "icsdp")) {
    const std::string p = path + ".icsdp";
    reject_unknown(*v, p, {"pi_star_1", "pi_star_J", "n0", "cycle_decay"});
    set_if(*v, "pi_star_1", p, s.icsdp.pi_star_1);
    set_if(*v, "pi_star_J", p, s.icsdp.pi_star_J);
    set_if(*v, "n0", p, s.icsdp.n0);
    set_if(*v, "cycle_decay", p, s.icsdp.cycle_decay);
  }
  if (const json* v = find(obj, "pomm")) {
    const std::string p = path + ".pomm";
    reject_unknown(*v, p, {"p1_star", "n0", "grade2_ratio", "switch_n"});
    set_if(*v, "p1_star", p, s.pomm.p1_star);
    set_if(*v, "n0", p, s.pomm.n0);
    set_if(*v, "grade2_ratio", p, s.pomm.grade2_ratio);
    set_if(*v, "switch_n", p, s.pomm.switch_n);
  }
  if (const json* v = find(obj, "nttp")) {
    const std::string p = path + ".nttp";
    reject_unknown(*v, p, {"prior_mean", "prior_var", "burnin", "iterations"});
    if (const json* w = find(*v, "prior_mean")) apply_triplet(*w, p + ".prior_mean", s.nttp.prior_mean);
    if (const json* w = find(*v, "prior_var")) apply_triplet(*w, p + ".prior_var", s.nttp.prior_var);
    set_if(*v, "burnin", p, s.nttp.burnin);
    set_if(*v, "iterations", p, s.nttp.iterations);
  }
  if (const json* v = find(obj, "boin")) parse_interval(*v, path + ".boin", s.boin);
  if (const json* v = find(obj, "mtpi2")) parse_interval(*v, path + ".mtpi2", s.mtpi2);
  set_if(obj, "rolling_consecutive_cap", path, s.rolling_consecutive_cap);
}

DesignKind parse_kind(const json& v, const std::string& path) {
  std::string name = as_string(v, path);
  std::optional<DesignKind> k = design_from_string(name);
  if (!k) fail(path, "unknown design '" + name + "'");
  return *k;
}

ScenarioSpec parse_scenario(const json& obj, const std::string& path, const TrialConfig& trial,
                            int index) {
  if (!obj.is_object()) fail(path, "expected an object");
  reject_unknown(obj, path, {"name", "label", "dose_grid", "p1", "truth"});

  ScenarioSpec sc;
  bool named = false;
  if (const json* v = find(obj, "name")) {
    sc = named_scenario(as_string(*v, path + ".name"), trial);
    named = true;
  } else {
    sc.label = "scenario-" + std::to_string(index + 1);
    sc.dose_grid = DoseGrid{default_dose_grid()};
  }
  if (const json* v = find(obj, "label")) sc.label = as_string(*v, path + ".label");
  if (const json* v = find(obj, "dose_grid")) sc.dose_grid = DoseGrid{as_double_vector(*v, path + ".dose_grid")};

  bool rederive = false;
  if (const json* v = find(obj, "p1")) {
    sc.p1 = as_double_vector(*v, path + ".p1");
    rederive = true;
  } else if (!named) {
    fail(path, "needs either a name or a p1 vector");
  }
  if (rederive) sc.derive_truth(trial.tau, trial.cycles);

  if (const json* v = find(obj, "truth")) {
    std::string t = as_string(*v, path + ".truth");
    if (t != "all-safe")
      fail(path + ".truth", "only the 'all-safe' override is accepted; the rest is derived from p1");
    if (sc.truth == ScenarioSpec::Truth::kAllUnsafe)
      fail(path + ".truth", "p1 marks every dose unsafe; it cannot be scored all-safe");
    sc.truth = ScenarioSpec::Truth::kAllSafe;
  }
  try {
    sc.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return sc;
}

std::vector<DesignChoice> parse_design_entry(const json& obj, const std::string& path,
                                             const DesignSettings& base) {
  if (!obj.is_object()) fail(path, "expected an object");
  reject_unknown(obj, path,
                 {"kind", "crm", "crm2", "icsdp", "pomm", "nttp", "boin", "mtpi2",
                  "rolling_consecutive_cap"});
  const json* kind = find(obj, "kind");
  if (!kind) fail(path, "missing 'kind'");

  DesignSettings settings = base;
  parse_design_params(obj, path, settings);

  std::vector<DesignChoice> out;
  if (kind->is_string() && kind->get<std::string>() == "all") {
    for (DesignKind k : all_design_kinds()) out.push_back({k, settings});
  } else {
    out.push_back({parse_kind(*kind, path + ".kind"), settings});
  }
  return out;
}

}  // namespace

const std::vector<double>& default_dose_grid() {
  static const std::vector<double> grid = {1.5, 2.5, 3.5, 4.5, 6.0, 7.0};
  return grid;
}

const std::vector<double>* named_scenario_p1(const std::string& name) {
  static const std::vector<std::pair<std::string, std::vector<double>>> table = {
      {"A", {0.30, 0.36, 0.42, 0.48, 0.54, 0.60}},
      {"B", {0.10, 0.17, 0.25, 0.30, 0.45, 0.60}},
      {"C", {0.40, 0.45, 0.50, 0.55, 0.60, 0.65}},
      {"D", {0.05, 0.05, 0.05, 0.80, 0.80, 0.80}},
      {"P.S.1", {0.300, 0.400, 0.450, 0.500, 0.550, 0.600}},
      {"P.S.2", {0.050, 0.070, 0.100, 0.150, 0.200, 0.300}},
      {"P.S.3", {0.100, 0.200, 0.300, 0.400, 0.500, 0.600}},
      {"P.S.4", {0.150, 0.200, 0.250, 0.300, 0.350, 0.400}},
      {"P.S.5", {0.400, 0.450, 0.500, 0.550, 0.600, 0.650}},
      {"P.S.6", {0.070, 0.090, 0.110, 0.130, 0.150, 0.170}},
  };
  for (const auto& [n, p1] : table)
    if (n == name) return &p1;
  return nullptr;
}

ScenarioSpec named_scenario(const std::string& name, const TrialConfig& trial) {
  const std::vector<double>* p1 = named_scenario_p1(name);
  if (!p1) throw ConfigError("unknown scenario name '" + name + "'");
  ScenarioSpec sc;
  sc.label = name;
  sc.p1 = *p1;
  sc.dose_grid = DoseGrid{default_dose_grid()};
  sc.derive_truth(trial.tau, trial.cycles);
  // the calibration set scores the very-safe vector by its stopping rule
  if (name == "P.S.6") sc.truth = ScenarioSpec::Truth::kAllSafe;
  return sc;
}

std::vector<ScenarioSpec> calibration_scenarios(int setting, const TrialConfig& trial) {
  std::vector<std::string> names = {"P.S.1", "P.S.2", "P.S.3", "P.S.4"};
  if (setting == 2) {
    names.push_back("P.S.5");
    names.push_back("P.S.6");
  }
  std::vector<ScenarioSpec> out;
  for (const auto& n : names) out.push_back(named_scenario(n, trial));
  return out;
}

std::vector<DesignSettings> default_calibration_grid(DesignKind kind, int setting) {
  const DesignSettings base = DesignSettings::defaults(setting);
  std::vector<DesignSettings> grid;
  auto with = [&](auto&& edit) {
    DesignSettings s = base;
    edit(s);
    grid.push_back(s);
  };
  switch (kind) {
    case DesignKind::kTiteCrm:
      for (double v : {0.5, 1.0, 2.0}) with([&](DesignSettings& s) { s.crm.sigma2 = v; });
      break;
    case DesignKind::kTiteCrm2:
      for (double v : {1.0, 10.0 / 3.0, 10.0})
        with([&](DesignSettings& s) { s.crm2.var_a0 = s.crm2.var_loga1 = v; });
      break;
    case DesignKind::kIcsdp:
      for (auto [pj, n0] : {std::pair{0.4, 6.0}, {0.3, 4.0}, {0.3, 6.0}, {0.4, 4.0}})
        with([&](DesignSettings& s) {
          s.icsdp.pi_star_J = pj;
          s.icsdp.n0 = n0;
        });
      break;
    case DesignKind::kPomm:
      for (double v : {1.0, 2.0, 4.0}) with([&](DesignSettings& s) { s.pomm.n0 = v; });
      break;
    case DesignKind::kNttp:
      with([&](DesignSettings& s) {
        s.nttp.prior_mean = {0.1, 0.5, 0.0};
        s.nttp.prior_var = {100.0, 100.0, 10.0};
      });
      with([&](DesignSettings& s) {
        s.nttp.prior_mean = {0.05, 0.1, 0.0};
        s.nttp.prior_var = {10.0, 10.0, 10.0};
      });
      break;
    case DesignKind::kTiteBoin:
      for (auto [a, b] : {std::pair{0.1, 0.9}, {1.0, 1.0}, {0.5, 0.5}})
        with([&](DesignSettings& s) {
          s.boin.prior_alpha = a;
          s.boin.prior_beta = b;
        });
      break;
    case DesignKind::kTiteMtpi2:
    case DesignKind::kRollingMtpi2:
      for (auto [a, b] : {std::pair{1.0, 1.0}, {0.5, 0.5}, {2.0, 2.0}})
        with([&](DesignSettings& s) {
          s.mtpi2.prior_alpha = a;
          s.mtpi2.prior_beta = b;
        });
      break;
  }
  return grid;
}

void StudyConfig::validate() const {
  rules.validate();
  trial.validate();
  if (replications < 1) throw ConfigError("run.replications: must be at least 1");
  if (threads < 0) throw ConfigError("run.threads: must be non-negative");
  if (scenarios.empty() && !calibration) throw ConfigError("scenario: block is required to simulate");
  if (designs.empty() && !calibration) throw ConfigError("design: block is required to simulate");
  for (std::size_t i = 1; i < scenarios.size(); ++i)
    if (scenarios[i].dose_grid.levels() != scenarios[0].dose_grid.levels())
      throw ConfigError("scenario: all scenarios must share one dose grid size");

  // full per-engine validation through the plan used to run them
  auto check = [&](DesignKind kind, const DesignSettings& settings, const ScenarioSpec& sc) {
    StudyPlan plan;
    plan.scenario = sc;
    plan.design = kind;
    plan.settings = settings;
    plan.rules = rules;
    plan.trial = trial;
    plan.replications = replications;
    plan.seed = seed;
    try {
      plan.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("design ") + to_string(kind) + ": " + e.what());
    }
  };
  const ScenarioSpec fallback =
      scenarios.empty() ? named_scenario("P.S.1", trial) : scenarios.front();
  for (const auto& d : designs)
    for (const auto& sc : (scenarios.empty() ? std::vector<ScenarioSpec>{fallback} : scenarios))
      check(d.kind, d.settings, sc);
  if (calibration) {
    if (calibration->grid.empty()) throw ConfigError("calibrate.grid: must not be empty");
    if (calibration->scenarios.empty()) throw ConfigError("calibrate.scenarios: must not be empty");
    for (const auto& s : calibration->grid)
      check(calibration->kind, s, calibration->scenarios.front());
  }
}

StudyConfig parse_study_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(doc, "config", {"scenario", "design", "rules", "run", "nttp", "calibrate"});

  StudyConfig cfg;

  if (const json* v = find(doc, "rules")) {
    reject_unknown(*v, "rules",
                   {"setting", "hard_safety_threshold", "unsafe_threshold", "safe_threshold",
                    "cv_threshold", "cv_min_patients", "sufficient_n", "kfold", "tau_cycle1"});
    set_if(*v, "setting", "rules", cfg.rules.setting);
    set_if(*v, "hard_safety_threshold", "rules", cfg.rules.hard_safety_threshold);
    set_if(*v, "unsafe_threshold", "rules", cfg.rules.unsafe_threshold);
    set_if(*v, "safe_threshold", "rules", cfg.rules.safe_threshold);
    set_if(*v, "cv_threshold", "rules", cfg.rules.cv_threshold);
    set_if(*v, "cv_min_patients", "rules", cfg.rules.cv_min_patients);
    set_if(*v, "sufficient_n", "rules", cfg.rules.sufficient_n);
    set_if(*v, "kfold", "rules", cfg.rules.kfold);
    set_if(*v, "tau_cycle1", "rules", cfg.rules.tau_cycle1);
  }
  if (cfg.rules.setting != 1 && cfg.rules.setting != 2)
    throw ConfigError("rules.setting: must be 1 or 2");

  DesignSettings base = DesignSettings::defaults(cfg.rules.setting);
  if (const json* v = find(doc, "nttp")) {
    reject_unknown(*v, "nttp", {"weights", "tau_nttp"});
    if (const json* w = find(*v, "weights")) {
      if (!w->is_array() || w->size() != 3) fail("nttp.weights", "expected 3 rows of 5 weights");
      for (int t = 0; t < 3; ++t) {
        std::vector<double> row = as_double_vector((*w)[t], "nttp.weights[" + std::to_string(t) + "]");
        if (row.size() != 5) fail("nttp.weights[" + std::to_string(t) + "]", "expected 5 weights");
        for (int g = 0; g < 5; ++g) base.nttp.weights.w[t][g] = row[g];
      }
    }
    set_if(*v, "tau_nttp", "nttp", base.nttp.tau_nttp);
  }

  if (const json* v = find(doc, "design")) {
    if (v->is_array()) {
      for (std::size_t i = 0; i < v->size(); ++i) {
        auto parsed = parse_design_entry((*v)[i], "design[" + std::to_string(i) + "]", base);
        cfg.designs.insert(cfg.designs.end(), parsed.begin(), parsed.end());
      }
    } else {
      auto parsed = parse_design_entry(*v, "design", base);
      cfg.designs.insert(cfg.designs.end(), parsed.begin(), parsed.end());
    }
  }

  if (const json* v = find(doc, "scenario")) {
    if (v->is_array()) {
      for (std::size_t i = 0; i < v->size(); ++i)
        cfg.scenarios.push_back(
            parse_scenario((*v)[i], "scenario[" + std::to_string(i) + "]", cfg.trial, static_cast<int>(i)));
    } else {
      cfg.scenarios.push_back(parse_scenario(*v, "scenario", cfg.trial, 0));
    }
  }

  if (const json* v = find(doc, "run")) {
    reject_unknown(*v, "run", {"replications", "seed", "threads", "out_dir"});
    set_if(*v, "replications", "run", cfg.replications);
    if (const json* w = find(*v, "seed")) cfg.seed = as_u64(*w, "run.seed");
    set_if(*v, "threads", "run", cfg.threads);
    if (const json* w = find(*v, "out_dir")) cfg.out_dir = as_string(*w, "run.out_dir");
  }

  if (const json* v = find(doc, "calibrate")) {
    reject_unknown(*v, "calibrate", {"design", "scenarios", "grid", "replications", "report"});
    CalibrationRequest req;
    if (const json* w = find(*v, "design")) {
      req.kind = parse_kind(*w, "calibrate.design");
    } else if (cfg.designs.size() == 1) {
      req.kind = cfg.designs.front().kind;
    } else {
      fail("calibrate.design", "required unless the design block names exactly one engine");
    }
    if (const json* w = find(*v, "scenarios")) {
      if (!w->is_array()) fail("calibrate.scenarios", "expected an array of scenario names");
      for (std::size_t i = 0; i < w->size(); ++i)
        req.scenarios.push_back(
            named_scenario(as_string((*w)[i], "calibrate.scenarios[" + std::to_string(i) + "]"), cfg.trial));
    } else {
      req.scenarios = calibration_scenarios(cfg.rules.setting, cfg.trial);
    }
    if (const json* w = find(*v, "grid")) {
      if (!w->is_array() || w->empty()) fail("calibrate.grid", "expected a non-empty array");
      for (std::size_t i = 0; i < w->size(); ++i) {
        const json& cell = (*w)[i];
        const std::string p = "calibrate.grid[" + std::to_string(i) + "]";
        if (!cell.is_object()) fail(p, "expected an object of engine overrides");
        reject_unknown(cell, p,
                       {"crm", "crm2", "icsdp", "pomm", "nttp", "boin", "mtpi2",
                        "rolling_consecutive_cap"});
        DesignSettings s = base;
        parse_design_params(cell, p, s);
        req.grid.push_back(s);
      }
    } else {
      req.grid = default_calibration_grid(req.kind, cfg.rules.setting);
    }
    req.replications = cfg.replications;
    if (const json* w = find(*v, "replications")) req.replications = as_int(*w, "calibrate.replications");
    if (req.replications < 1) fail("calibrate.replications", "must be at least 1");
    if (const json* w = find(*v, "report")) req.report = as_string(*w, "calibrate.report");
    cfg.calibration = std::move(req);
  }

  cfg.validate();
  return cfg;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

}  // namespace escalate
