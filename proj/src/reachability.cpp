#include "spap/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spap/vehicle_dynamics.hpp"

namespace spap {

bool OccupancyTube::occupies(int lane) const {
    for (int k = 0; k < steps_; ++k)
        if (cell(k, lane).occupied) return true;
    return false;
}

bool OccupancyTube::contained_in_shifted(const OccupancyTube& outer, int shift, double tol) const {
    const int lanes = std::min(lanes_, outer.lanes_);
    for (int k = 0; k < steps_ && k + shift < outer.steps_; ++k) {
        for (int l = 0; l < lanes; ++l) {
            const TubeCell& in = cell(k, l);
            if (!in.occupied) continue;
            const TubeCell& out = outer.cell(k + shift, l);
            if (!out.occupied || in.lo < out.lo - tol || in.hi > out.hi + tol) return false;
        }
    }
    return true;
}

void OccupancyTube::dump_csv(std::ostream& os, const char* route_label) const {
    for (int k = 0; k < steps_; ++k)
        for (int l = 0; l < lanes_; ++l) {
            const TubeCell& c = cell(k, l);
            if (c.occupied) os << route_label << ',' << k << ',' << l << ',' << c.lo << ',' << c.hi << '\n';
        }
}

namespace {

constexpr int kNever = std::numeric_limits<int>::max() / 4;

// First step k >= from (k >= 1) at which pos[k] reaches the threshold.
int first_reach(const std::vector<double>& pos, int from, double threshold, bool strict) {
    if (from >= kNever) return kNever;
    for (int k = std::max(from, 1); k < static_cast<int>(pos.size()); ++k)
        if (strict ? pos[k] > threshold : pos[k] >= threshold) return k;
    return kNever;
}

} // namespace

OccupancyTube occupancy_tube(const SystemState& state, RouteId route, const ParamDistribution& dist,
                             const SurroundingDriverModel& model, const RoadGeometry& geometry, double t_h, double dt) {
    const int K = static_cast<int>(std::lround(t_h / dt));
    const int n_lc = std::max(1, static_cast<int>(std::lround(model.tau_lc / dt)));
    OccupancyTube tube(K + 1, geometry.lane_count);
    if (state.exited_S) return tube;

    std::vector<double> x_lo(static_cast<std::size_t>(K + 1));
    std::vector<double> x_hi(static_cast<std::size_t>(K + 1));
    {
        double d_lo = state.d_S, v_lo = state.v_S, d_hi = state.d_S, v_hi = state.v_S;
        x_lo[0] = x_hi[0] = state.d_S;
        for (int k = 1; k <= K; ++k) {
            surrounding_kinematics(d_lo, v_lo, dist.v_d.lo(), model, dt);
            surrounding_kinematics(d_hi, v_hi, dist.v_d.hi(), model, dt);
            x_lo[static_cast<std::size_t>(k)] = d_lo;
            x_hi[static_cast<std::size_t>(k)] = d_hi;
        }
    }

    const LanePhase ph = decode_phase(state.l_S, state.exited_S, n_lc);
    const int s = kStartLane;
    const bool two_changes = route != RouteId::Route1;

    // Event windows [earliest, latest] in steps relative to now. Past events
    // get non-positive indices; kNever means beyond the horizon.
    int start1_min = 0, start1_max = 0;
    if (ph.lane == s && !ph.changing) {
        start1_min = first_reach(x_hi, 1, dist.d_lc1.lo(), false);
        start1_max = first_reach(x_lo, 1, dist.d_lc1.hi(), false);
    } else if (ph.lane == s && ph.changing) {
        start1_min = start1_max = -ph.elapsed;
    } else {
        start1_min = start1_max = -kNever;
    }
    auto plus = [](int a, int b) { return (a >= kNever || b >= kNever) ? kNever : a + b; };
    const int end1_min = plus(start1_min, n_lc);
    const int end1_max = plus(start1_max, n_lc);

    int start2_min = kNever, start2_max = kNever;
    if (two_changes) {
        if (ph.lane < s + 1 || (ph.lane == s + 1 && !ph.changing)) {
            start2_min = first_reach(x_hi, std::max(end1_min, 0), dist.d_lc2.lo(), false);
            start2_max = first_reach(x_lo, std::max(end1_max, 0), dist.d_lc2.hi(), false);
        } else if (ph.lane == s + 1 && ph.changing) {
            start2_min = start2_max = -ph.elapsed;
        } else {
            start2_min = start2_max = -kNever;
        }
    }
    const int end2_max = plus(start2_max, n_lc);
    int exit_max = kNever;
    if (route == RouteId::Route3) exit_max = first_reach(x_lo, std::max(end2_max, 0), geometry.offramp_end, true);

    auto mark = [&](int k, int lane) {
        if (lane < 0 || lane >= geometry.lane_count) return;
        TubeCell& c = tube.cell(k, lane);
        c.occupied = true;
        c.lo = x_lo[static_cast<std::size_t>(k)];
        c.hi = x_hi[static_cast<std::size_t>(k)];
    };

    const LaneSet now = ph.occupancy();
    for (int l : now.lanes()) mark(0, l);
    for (int k = 1; k <= K; ++k) {
        if (k < end1_max) mark(k, s);
        if (k >= start1_min && (!two_changes || k < end2_max)) mark(k, s + 1);
        if (two_changes && k >= start2_min && (route == RouteId::Route2 || k < exit_max)) mark(k, s + 2);
    }
    return tube;
}

std::vector<double> ego_profile(double d_E, double v_E, double a_t, double follow, int steps, double dt,
                                double v_limit) {
    std::vector<double> out(static_cast<std::size_t>(steps + 1));
    double d = d_E, v = v_E;
    out[0] = d;
    for (int k = 1; k <= steps; ++k) {
        ego_kinematics(d, v, k == 1 ? a_t : follow, dt, v_limit);
        out[static_cast<std::size_t>(k)] = d;
    }
    return out;
}

double profile_gap(const OccupancyTube& tube, const std::vector<double>& ego, int l_E) {
    double gap = kNoConflictGap;
    const int n = std::min(tube.steps(), static_cast<int>(ego.size()));
    for (int k = 0; k < n; ++k) {
        const TubeCell& c = tube.cell(k, l_E);
        if (c.occupied) gap = std::min(gap, interval_distance(ego[static_cast<std::size_t>(k)], c.lo, c.hi));
    }
    return gap;
}

double min_gap(const OccupancyTube& tube, double d_E, double v_E, int l_E, double a_t, const SafetyParams& safety,
               double t_h, double dt) {
    if (a_t < safety.a_min - 1e-12 || a_t > safety.a_max + 1e-12)
        throw std::invalid_argument("min_gap: a_t outside [a_min, a_max]");
    if (l_E < 0 || l_E >= tube.lanes() || !tube.occupies(l_E)) return kNoConflictGap;
    const int K = static_cast<int>(std::lround(t_h / dt));
    double best = 0.0;
    for (double follow : {safety.a_min, safety.a_max, a_t}) {
        const auto ego = ego_profile(d_E, v_E, a_t, follow, K, dt, safety.v_limit);
        best = std::max(best, profile_gap(tube, ego, l_E));
    }
    return best;
}

} // namespace spap
