#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "spap/prediction.hpp"
#include "spap/reachability.hpp"
#include "spap/scenario.hpp"

namespace spap {

/// Identifies the random streams of one planning call. Each (action, route,
/// sample) triple gets its own stream derived from these keys, so results do
/// not depend on evaluation order or concurrency.
struct PlanKey {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

struct SafetyResult {
    int theta = 0;
    double dd = kNoConflictGap;
    bool operator==(const SafetyResult&) const = default;
};

/// One feasible route of an adapted prediction together with its tube.
struct RouteTube {
    RouteId route = RouteId::Route1;
    double prob = 0.0;
    ParamDistribution dist;
    OccupancyTube tube;
};

/// Tubes for every route of an already adapted prediction, in route order.
std::vector<RouteTube> build_route_tubes(const SystemState& state, const Prediction& adapted,
                                         const ScenarioConfig& cfg);

SafetyResult safety_eval(const SystemState& state, const std::vector<RouteTube>& routes, double a_t,
                         const ScenarioConfig& cfg);
/// Adapts pred to the state, builds the tubes and evaluates a_t.
SafetyResult safety_eval(const SystemState& state, const Prediction& pred, double a_t, const ScenarioConfig& cfg);

/// Reward J = sum of ego speeds over the lookahead when the ego applies a_t
/// and then, step by step, the largest grid acceleration that still admits a
/// bang-bang continuation keeping the gap to this sampled trajectory above d_m.
double inner_q(const SystemState& state, double a_t, const TrajectoryParams& params, const ScenarioConfig& cfg);

/// Sum of ego speeds when applying a_t then a_max with nothing in the way.
double free_road_q(const SystemState& state, double a_t, const ScenarioConfig& cfg);

double expected_reward(const SystemState& state, const std::vector<RouteTube>& routes, double a_t,
                       const ScenarioConfig& cfg, const PlanKey& key);
/// Throws ConservativenessViolation when no route is feasible.
double expected_reward(const SystemState& state, const Prediction& pred, double a_t, const ScenarioConfig& cfg,
                       const PlanKey& key);

struct ActionEval {
    double a_t = 0.0;
    int theta = 1;
    double dd = 0.0;
    /// Reward; NaN when not evaluated (unsafe actions are never selected).
    double omega = 0.0;
    double phi = 0.0;
};

struct PlanResult {
    double u = 0.0;
    double omega = 0.0;
    int theta = 1;
    double dd = kNoConflictGap;
    std::vector<ActionEval> table;
};

/// Balance of reward and guaranteed gap: omega + gap_weight * min(dd, gap_cap).
double balance(double omega, double dd, const ScenarioConfig& cfg);

/// Speculative planning over the acceleration grid: worst-case safety filter,
/// sampled expected reward, reward/gap balance.
PlanResult plan(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg, const PlanKey& key);

/// Grid key of an acceleration, independent of the grid spacing.
inline std::uint64_t accel_key(double a) {
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(a * 1e6)));
}

} // namespace spap
