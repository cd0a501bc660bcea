#pragma once

#include <string>
#include <vector>

#include "spap/scenario.hpp"

namespace spap {

inline constexpr int kStartLane = 1;

/// Parameter vector w of one concrete surrounding-vehicle trajectory.
struct TrajectoryParams {
    RouteId route = RouteId::Route1;
    double d_lc1 = 0.0;
    double d_lc2 = 0.0; // unused for Route1
    double v_d = 25.0;

    bool operator==(const TrajectoryParams&) const = default;
};

std::vector<std::string> check_params(const TrajectoryParams& params, const SurroundingDriverModel& model,
                                      const RoadGeometry& geometry);

/// Lateral phase of the surrounding vehicle, decoded from SystemState::l_S.
struct LanePhase {
    int lane = kStartLane;
    bool changing = false; // moving from lane to lane + 1
    int elapsed = 0;       // completed steps of the current change
    bool exited = false;

    LaneSet occupancy() const;
    bool operator==(const LanePhase&) const = default;
};

LanePhase decode_phase(double l_S, bool exited, int change_steps);
double encode_lane(const LanePhase& phase, int change_steps);

/// Lane-change trigger threshold for the next change from `phase`, or a
/// negative value when no further change is planned.
double next_change_position(const LanePhase& phase, const TrajectoryParams& params);

/// Advances the lateral phase by one step given the new position d_new.
/// A change starts at the first step where d_new >= its trigger position and
/// only once the previous change has completed.
LanePhase advance_phase(LanePhase phase, const TrajectoryParams& params, const RoadGeometry& geometry, double d_new,
                        int change_steps);

/// Ego longitudinal step. Throws std::invalid_argument when u is outside
/// [a_min, a_max].
SystemState step_ego(const SystemState& state, double u, double dt, const SafetyParams& safety);

/// Ego kinematics only; shared by planners so predicted and executed motion use
/// identical arithmetic.
inline void ego_kinematics(double& d, double& v, double u, double dt, double v_limit) {
    d = d + v * dt;
    double nv = v + u * dt;
    v = nv < 0.0 ? 0.0 : (nv > v_limit ? v_limit : nv);
}

/// Surrounding acceleration: k_v * (v_d - v_S) clamped to +-a_bound_S.
double phi_accel(const SurroundingDriverModel& model, double v_S);
double phi_accel(const SurroundingDriverModel& model, double v_S, double v_d);

inline void surrounding_kinematics(double& d, double& v, double v_d, const SurroundingDriverModel& model, double dt) {
    const double a = phi_accel(model, v, v_d);
    d = d + v * dt;
    const double nv = v + a * dt;
    v = nv < 0.0 ? 0.0 : nv;
}

/// Lane occupancy of a vehicle following `params` at position d_S, where
/// t_in_change is the time since the most recent lane change began (any value
/// >= tau_lc means no change is in progress). Assumes each change completes
/// before the next trigger position is reached.
LaneSet psi_lane(const TrajectoryParams& params, const SurroundingDriverModel& model, const RoadGeometry& geometry,
                 double d_S, double t_in_change);

/// Gap between successive lane-change positions: d_a * q_a + d_c + noise.
/// Throws std::invalid_argument when |noise| > d_n_bound.
double lane_change_gap(const SurroundingDriverModel& model, double noise);
double lane_change_gap(const SurroundingDriverModel& model, double q_a, double noise);

/// Window for the second change position of an off-ramp exit.
Range exit_change_window(const RoadGeometry& geometry);

/// Builds w from the driver's aggressiveness and two independent noise draws.
/// Route3's second position is clamped into the exit window.
TrajectoryParams make_trajectory_params(RouteId route, const SurroundingDriverModel& model,
                                        const RoadGeometry& geometry, double q_a, double noise1, double noise2,
                                        double v_d);

SystemState step_surrounding(const SystemState& state, const TrajectoryParams& params,
                             const SurroundingDriverModel& model, const RoadGeometry& geometry, double dt);

} // namespace spap
