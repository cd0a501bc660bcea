#pragma once

#include <ostream>
#include <vector>

#include "spap/prediction.hpp"
#include "spap/scenario.hpp"

namespace spap {

/// Sentinel gap when the tube never shares the ego lane.
inline constexpr double kNoConflictGap = 100.0;

struct TubeCell {
    bool occupied = false;
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x, double tol = 0.0) const { return occupied && x >= lo - tol && x <= hi + tol; }
    bool operator==(const TubeCell&) const = default;
};

/// Per-step, per-lane longitudinal intervals covering every position the
/// surrounding vehicle can occupy under one route. Step 0 is the current state.
class OccupancyTube {
public:
    OccupancyTube() = default;
    OccupancyTube(int steps, int lanes) : steps_(steps), lanes_(lanes), cells_(static_cast<std::size_t>(steps * lanes)) {}

    int steps() const { return steps_; }
    int lanes() const { return lanes_; }
    const TubeCell& cell(int step, int lane) const { return cells_[index(step, lane)]; }
    TubeCell& cell(int step, int lane) { return cells_[index(step, lane)]; }

    bool occupies(int lane) const;
    /// Cell-wise inclusion of this tube in `outer` shifted forward by `shift`
    /// steps, over the overlapping steps. Positions compared with tolerance tol.
    bool contained_in_shifted(const OccupancyTube& outer, int shift, double tol) const;

    void dump_csv(std::ostream& os, const char* route_label) const;

private:
    std::size_t index(int step, int lane) const { return static_cast<std::size_t>(step * lanes_ + lane); }
    int steps_ = 0;
    int lanes_ = 0;
    std::vector<TubeCell> cells_;
};

/// Union occupancy of all surrounding futures with positive density under
/// `route` over the next t_h seconds, by interval propagation: positions are
/// bracketed by the extreme desired speeds and lane windows by the earliest and
/// latest possible change events.
OccupancyTube occupancy_tube(const SystemState& state, RouteId route, const ParamDistribution& dist,
                             const SurroundingDriverModel& model, const RoadGeometry& geometry, double t_h, double dt);

/// Ego positions for: a_t at the first step, then constant `follow` until the
/// horizon. Index 0 is the current position.
std::vector<double> ego_profile(double d_E, double v_E, double a_t, double follow, int steps, double dt,
                                double v_limit);

/// Distance from x to [lo, hi], zero inside.
inline double interval_distance(double x, double lo, double hi) {
    if (x < lo) return lo - x;
    if (x > hi) return x - hi;
    return 0.0;
}

/// Guaranteed gap of one ego position profile against the tube in lane l_E.
double profile_gap(const OccupancyTube& tube, const std::vector<double>& ego, int l_E);

/// Best guaranteed same-lane gap over the follow-up policies {a_min, a_max,
/// a_t} applied after a_t; kNoConflictGap when the tube never enters l_E.
double min_gap(const OccupancyTube& tube, double d_E, double v_E, int l_E, double a_t, const SafetyParams& safety,
               double t_h, double dt);

} // namespace spap
