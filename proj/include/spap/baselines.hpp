#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spap/planner.hpp"
#include "spap/prediction.hpp"
#include "spap/scenario.hpp"

namespace spap {

/// IDM law a·[1 − (v/v0)^δ − (s*/s)²], s* = s0 + max(0, vT + vΔv/(2√(ab))),
/// clamped to [−hard_brake, a]. No leader (nullopt gap) gives the free-road
/// term only. `gap` is the net distance to the leader.
double idm_law(double v, std::optional<double> gap, double dv, const IdmParams& p);

/// Leader selection per variant: 1 same lane only; 2 also an adjacent-lane
/// vehicle with its turn signal on; 3 any lane. The leader must be ahead.
bool idm_has_leader(const SystemState& state, int variant, const ScenarioConfig& cfg);

/// IDM acceleration for a variant, also clamped to the ego actuation limits.
double idm_accel(const SystemState& state, int variant, const ScenarioConfig& cfg);

/// Certainty-equivalent worst-case planner: same safety filter as plan(), then
/// maximizes the minimum over feasible routes of inner_q against the
/// mid-support sample. Brakes at a_min when nothing is safe.
PlanResult mpc_plan(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg);

struct PlannerStep {
    double u = 0.0;
    bool has_plan = false; // plan is filled for prediction-consuming planners
    PlanResult plan;
    bool leader = false;   // IDM variants: a leader constrained this step
};

/// Planner interface used by the harness. The prediction passed in is the
/// running (already adapted) prediction.
class Planner {
public:
    virtual ~Planner() = default;
    virtual std::string name() const = 0;
    virtual bool uses_prediction() const { return true; }
    virtual PlannerStep act(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg,
                            const PlanKey& key) const = 0;
    /// Prediction transform applied once at episode start (identity by default).
    virtual Prediction prepare(const Prediction& pred, const ScenarioConfig&) const { return pred; }
};

/// Wraps a prediction-consuming planner so the initial prediction is
/// conditioned on a known aggressiveness level.
std::unique_ptr<Planner> with_aggressiveness(std::unique_ptr<Planner> inner, double q_a_est);

/// Known planner names: idm1, idm2, idm3, mpc, mpc_agg, spap, spap_agg.
const std::vector<std::string>& planner_names();
bool is_planner_name(const std::string& name);

/// Builds a planner by name. The _agg variants need the true aggressiveness.
/// Throws std::invalid_argument on unknown names.
std::unique_ptr<Planner> make_planner(const std::string& name, double q_a_true = 0.0);

} // namespace spap
