#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "escalate/designs.hpp"
#include "escalate/harness.hpp"
#include "escalate/patient_sim.hpp"
#include "escalate/rules.hpp"
#include "escalate/trial.hpp"

// Study configuration files: JSON with five blocks (scenario, design, rules,
// run, nttp) plus an optional calibrate block. Unknown keys anywhere are
// rejected with the offending path in the message.

namespace escalate {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One design to run: engine kind plus its resolved hyper-parameters.
struct DesignChoice {
  DesignKind kind = DesignKind::kTiteCrm;
  DesignSettings settings;
};

struct CalibrationRequest {
  DesignKind kind = DesignKind::kTiteCrm;
  std::vector<ScenarioSpec> scenarios;
  std::vector<DesignSettings> grid;
  int replications = 0;          // 0: inherit the run block
  std::string report = "calibration.txt";
};

struct StudyConfig {
  std::vector<ScenarioSpec> scenarios;
  std::vector<DesignChoice> designs;
  RuleConfig rules;
  TrialConfig trial;
  int replications = 1000;
  std::uint64_t seed = 1;
  int threads = 0;               // 0: library decides
  std::string out_dir = ".";
  std::optional<CalibrationRequest> calibration;

  void validate() const;
};

/// The six-dose grid used throughout (MBq).
const std::vector<double>& default_dose_grid();

/// Cycle-1 DLT vector for a named scenario (A-D, P.S.1-P.S.6).
const std::vector<double>* named_scenario_p1(const std::string& name);

/// Scenario from a name, on the default grid, with its truth resolved
/// (P.S.6 scores as the very-safe stop).
ScenarioSpec named_scenario(const std::string& name, const TrialConfig& trial);

/// Prior-calibration scenario set for a rule setting: P.S.1-4, plus
/// P.S.5-6 under the full rules.
std::vector<ScenarioSpec> calibration_scenarios(int setting, const TrialConfig& trial);

/// Small hyper-parameter grid around the shipped defaults for one engine.
std::vector<DesignSettings> default_calibration_grid(DesignKind kind, int setting);

/// Parses and validates a config document / file. Throws ConfigError with a
/// field path (and parse position for malformed JSON).
StudyConfig parse_study_config(const std::string& text);
StudyConfig load_study_config(const std::string& path);

}  // namespace escalate
