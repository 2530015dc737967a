#pragma once

#include <memory>
#include <vector>

#include "escalate/designs.hpp"
#include "escalate/optim.hpp"

// Engine construction and the few helpers shared between engine files.

namespace escalate::detail {

std::unique_ptr<Design> make_tite_crm(const TiteCrmConfig& cfg);
std::unique_ptr<Design> make_tite_crm2(const TiteCrm2Config& cfg);
std::unique_ptr<Design> make_icsdp(const IcsdpConfig& cfg);
std::unique_ptr<Design> make_pomm(const PommConfig& cfg);
std::unique_ptr<Design> make_nttp(const NttpConfig& cfg);
std::unique_ptr<Design> make_tite_boin(const IntervalConfig& cfg);
std::unique_ptr<Design> make_tite_mtpi2(const IntervalConfig& cfg);
std::unique_ptr<Design> make_rolling_mtpi2(const IntervalConfig& cfg, int consecutive_cap);

bool any_dlt(const TrialState& state);

/// Highest non-excluded level, or -1 when everything is barred.
int top_allowed(const TrialState& state, int levels);

/// Lowest |value - target| over non-excluded levels, ties to the lower
/// level; -1 when everything is excluded.
int argmin_gap(const std::vector<double>& value, double target, const TrialState& state);

/// One-level move from the current dose, clamped to the grid and to the
/// non-excluded range.
int step_level(const TrialState& state, Action action, int levels);

/// Cholesky factor of the numeric Hessian at `x`, retrying with a growing
/// diagonal ridge when curvature is indefinite at the optimum.
la::Matrix curvature_chol(const opt::Objective& f, const std::vector<double>& x);

}  // namespace escalate::detail
