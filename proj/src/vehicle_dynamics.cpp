#include "spap/vehicle_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spap {

std::vector<std::string> check_params(const TrajectoryParams& p, const SurroundingDriverModel& m,
                                      const RoadGeometry& g) {
    std::vector<std::string> out;
    if (!(m.d_lc0 < p.d_lc1)) out.emplace_back("d_lc1 must lie beyond d_lc0");
    if (p.route != RouteId::Route1 && !(p.d_lc1 < p.d_lc2)) out.emplace_back("d_lc2 must lie beyond d_lc1");
    if (p.route == RouteId::Route3) {
        const Range w = exit_change_window(g);
        if (p.d_lc2 < w.lo || p.d_lc2 > w.hi) out.emplace_back("route3 d_lc2 must lie in the exit window");
    }
    if (!(p.v_d >= 0.0)) out.emplace_back("v_d must be non-negative");
    return out;
}

LaneSet LanePhase::occupancy() const {
    if (exited) return {};
    if (changing) return LaneSet::of(lane) | LaneSet::of(lane + 1);
    return LaneSet::of(lane);
}

LanePhase decode_phase(double l_S, bool exited, int change_steps) {
    LanePhase ph;
    ph.exited = exited;
    const double base = std::floor(l_S);
    ph.lane = static_cast<int>(base);
    const double frac = l_S - base;
    if (frac > 0.0) {
        ph.changing = true;
        ph.elapsed = std::clamp(static_cast<int>(std::floor(frac * change_steps)), 0, change_steps - 1);
    }
    return ph;
}

double encode_lane(const LanePhase& phase, int change_steps) {
    if (!phase.changing) return static_cast<double>(phase.lane);
    return phase.lane + (phase.elapsed + 0.5) / change_steps;
}

double next_change_position(const LanePhase& phase, const TrajectoryParams& params) {
    if (phase.exited || phase.changing) return -1.0;
    if (phase.lane == kStartLane) return params.d_lc1;
    if (phase.lane == kStartLane + 1 && params.route != RouteId::Route1) return params.d_lc2;
    return -1.0;
}

LanePhase advance_phase(LanePhase ph, const TrajectoryParams& params, const RoadGeometry& geometry, double d_new,
                        int change_steps) {
    if (ph.exited) return ph;
    if (ph.changing) {
        ++ph.elapsed;
        if (ph.elapsed >= change_steps) {
            ph.changing = false;
            ph.elapsed = 0;
            ++ph.lane;
        }
    }
    if (!ph.changing) {
        const double trigger = next_change_position(ph, params);
        if (trigger >= 0.0 && d_new >= trigger) {
            ph.changing = true;
            ph.elapsed = 0;
        }
    }
    if (!ph.changing && params.route == RouteId::Route3 && ph.lane == geometry.offramp_lane &&
        d_new > geometry.offramp_end)
        ph.exited = true;
    return ph;
}

SystemState step_ego(const SystemState& state, double u, double dt, const SafetyParams& safety) {
    if (u < safety.a_min - 1e-12 || u > safety.a_max + 1e-12)
        throw std::invalid_argument("ego acceleration outside [a_min, a_max]");
    SystemState next = state;
    ego_kinematics(next.d_E, next.v_E, u, dt, safety.v_limit);
    next.t = state.t + dt;
    return next;
}

double phi_accel(const SurroundingDriverModel& model, double v_S) { return phi_accel(model, v_S, model.v_d); }

double phi_accel(const SurroundingDriverModel& model, double v_S, double v_d) {
    return std::clamp(model.k_v * (v_d - v_S), -model.a_bound_S, model.a_bound_S);
}

LaneSet psi_lane(const TrajectoryParams& params, const SurroundingDriverModel& model, const RoadGeometry& geometry,
                 double d_S, double t_in_change) {
    if (d_S < 0.0) throw std::invalid_argument("d_S must be non-negative");
    if (auto problems = check_params(params, model, geometry); !problems.empty())
        throw std::invalid_argument(problems.front());
    const bool in_change = t_in_change < model.tau_lc;
    const int s = kStartLane;
    if (d_S < params.d_lc1) return LaneSet::of(s);
    if (params.route == RouteId::Route1 || d_S < params.d_lc2)
        return in_change ? LaneSet::of(s) | LaneSet::of(s + 1) : LaneSet::of(s + 1);
    if (in_change) return LaneSet::of(s + 1) | LaneSet::of(s + 2);
    if (params.route == RouteId::Route3 && d_S > geometry.offramp_end) return {};
    return LaneSet::of(s + 2);
}

double lane_change_gap(const SurroundingDriverModel& model, double noise) {
    return lane_change_gap(model, model.q_a, noise);
}

double lane_change_gap(const SurroundingDriverModel& model, double q_a, double noise) {
    if (std::abs(noise) > model.d_n_bound) throw std::invalid_argument("noise outside [-d_n_bound, d_n_bound]");
    return model.d_a * q_a + model.d_c + noise;
}

Range exit_change_window(const RoadGeometry& geometry) {
    return {geometry.offramp_start, geometry.offramp_end - geometry.offramp_margin};
}

TrajectoryParams make_trajectory_params(RouteId route, const SurroundingDriverModel& model,
                                        const RoadGeometry& geometry, double q_a, double noise1, double noise2,
                                        double v_d) {
    TrajectoryParams p;
    p.route = route;
    p.v_d = v_d;
    p.d_lc1 = model.d_lc0 + lane_change_gap(model, q_a, noise1);
    p.d_lc2 = p.d_lc1 + lane_change_gap(model, q_a, noise2);
    if (route == RouteId::Route3) {
        const Range w = exit_change_window(geometry);
        p.d_lc2 = std::clamp(p.d_lc2, w.lo, w.hi);
    }
    return p;
}

SystemState step_surrounding(const SystemState& state, const TrajectoryParams& params,
                             const SurroundingDriverModel& model, const RoadGeometry& geometry, double dt) {
    if (state.exited_S) return state;
    const int n_lc = std::max(1, static_cast<int>(std::lround(model.tau_lc / dt)));
    SystemState next = state;
    surrounding_kinematics(next.d_S, next.v_S, params.v_d, model, dt);
    const LanePhase ph = advance_phase(decode_phase(state.l_S, false, n_lc), params, geometry, next.d_S, n_lc);
    next.l_S = encode_lane(ph, n_lc);
    next.exited_S = ph.exited;
    return next;
}

} // namespace spap
