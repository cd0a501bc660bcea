#include <doctest.h>

#include "checks.hpp"
#include "spap/reachability.hpp"

using namespace spap;

namespace {

ParamDistribution point_dist(const TrajectoryParams& w) {
    ParamDistribution d;
    d.d_lc1 = BoundedDist::uniform(w.d_lc1, w.d_lc1);
    d.d_lc2 = BoundedDist::uniform(w.d_lc2, w.d_lc2);
    d.v_d = BoundedDist::uniform(w.v_d, w.v_d);
    return d;
}

// First step (relative) at which the stepped trajectory occupies `lane`, or -1.
int first_step_in(SystemState s, const TrajectoryParams& w, int lane, int steps) {
    const ScenarioConfig c;
    for (int k = 0; k <= steps; ++k) {
        if (surrounding_occupancy(s).contains(lane)) return k;
        s = step_surrounding(s, w, c.driver, c.geometry, c.dt);
    }
    return -1;
}

int last_step_in(SystemState s, const TrajectoryParams& w, int lane, int steps) {
    const ScenarioConfig c;
    int last = -1;
    for (int k = 0; k <= steps; ++k) {
        if (surrounding_occupancy(s).contains(lane)) last = k;
        s = step_surrounding(s, w, c.driver, c.geometry, c.dt);
    }
    return last;
}

int tube_first(const OccupancyTube& t, int lane) {
    for (int k = 0; k < t.steps(); ++k)
        if (t.cell(k, lane).occupied) return k;
    return -1;
}

int tube_last(const OccupancyTube& t, int lane) {
    int last = -1;
    for (int k = 0; k < t.steps(); ++k)
        if (t.cell(k, lane).occupied) last = k;
    return last;
}

} // namespace

TEST_SUITE("reachability") {

TEST_CASE("interval distance") {
    CHECK(interval_distance(5.0, 10.0, 20.0) == 5.0);
    CHECK(interval_distance(25.0, 10.0, 20.0) == 5.0);
    CHECK(interval_distance(15.0, 10.0, 20.0) == 0.0);
}

TEST_CASE("ego profile follows the closed form at constant speed") {
    const auto p = ego_profile(100.0, 20.0, 0.0, 0.0, 10, 0.1, 30.0);
    REQUIRE(p.size() == 11);
    for (int k = 0; k <= 10; ++k) CHECK(p[static_cast<std::size_t>(k)] == doctest::Approx(100.0 + 2.0 * k));
}

TEST_CASE("a point-mass distribution gives a zero-width tube on the single trajectory") {
    const ScenarioConfig c;
    TrajectoryParams w;
    w.route = RouteId::Route2;
    w.d_lc1 = 350.0;
    w.d_lc2 = 420.0;
    w.v_d = 25.3;
    SystemState s;
    s.d_S = 330.0;
    s.v_S = 24.6;
    const auto tube = occupancy_tube(s, w.route, point_dist(w), c.driver, c.geometry, c.t_h, c.dt);
    SystemState x = s;
    for (int k = 0; k <= c.lookahead_steps(); ++k) {
        for (int lane = 0; lane < c.geometry.lane_count; ++lane) {
            const TubeCell& cell = tube.cell(k, lane);
            CHECK(cell.occupied == surrounding_occupancy(x).contains(lane));
            if (cell.occupied) {
                CHECK(cell.lo == cell.hi);
                CHECK(cell.lo == x.d_S);
            }
        }
        x = step_surrounding(x, w, c.driver, c.geometry, c.dt);
    }
}

TEST_CASE("lane windows come from the extreme parameter trajectories") {
    // Lane-2 occupancy starts with the earliest possible change (fastest
    // driver, earliest trigger) and lane-1 occupancy ends with the latest.
    const ScenarioConfig c;
    const Prediction prior = make_prediction(c);
    const auto& dist = prior.find(RouteId::Route1)->dist;
    SystemState s;
    s.d_S = 300.0;
    s.v_S = 25.0;
    const int K = 120;
    const auto tube = occupancy_tube(s, RouteId::Route1, dist, c.driver, c.geometry, 12.0, c.dt);

    TrajectoryParams early;
    early.route = RouteId::Route1;
    early.d_lc1 = dist.d_lc1.lo();
    early.v_d = dist.v_d.hi();
    TrajectoryParams late = early;
    late.d_lc1 = dist.d_lc1.hi();
    late.v_d = dist.v_d.lo();
    CHECK(tube_first(tube, 2) == first_step_in(s, early, 2, K));
    CHECK(tube_last(tube, 1) == last_step_in(s, late, 1, K));
    CHECK(tube.cell(0, 1).occupied);
    CHECK_FALSE(tube.occupies(3));
}

TEST_CASE("an exited vehicle leaves the tube empty past the exit") {
    const ScenarioConfig c;
    TrajectoryParams w;
    w.route = RouteId::Route3;
    w.d_lc1 = 350.0;
    w.d_lc2 = 420.0;
    w.v_d = 25.0;
    SystemState s;
    s.d_S = 480.0;
    s.v_S = 25.0;
    s.l_S = 3.0;
    const auto tube = occupancy_tube(s, w.route, point_dist(w), c.driver, c.geometry, c.t_h, c.dt);
    for (int k = 0; k < tube.steps(); ++k) {
        const bool past = tube.cell(k, 3).occupied ? tube.cell(k, 3).lo > c.geometry.offramp_end : false;
        CHECK_FALSE(past);
    }
    CHECK(tube_last(tube, 3) < tube.steps() - 1);
    for (int lane = 0; lane < 3; ++lane) CHECK_FALSE(tube.occupies(lane));

    s.exited_S = true;
    const auto gone = occupancy_tube(s, w.route, point_dist(w), c.driver, c.geometry, c.t_h, c.dt);
    for (int lane = 0; lane < 4; ++lane) CHECK_FALSE(gone.occupies(lane));
}

TEST_CASE("min_gap sentinel, parallel motion and argument checks") {
    const ScenarioConfig c;
    SystemState s;
    s.d_S = 100.0; // far before any change: the tube stays in lane 1
    s.d_E = 90.0;
    const auto prior = make_prediction(c);
    const auto far = occupancy_tube(s, RouteId::Route2, prior.find(RouteId::Route2)->dist, c.driver, c.geometry,
                                    c.t_h, c.dt);
    CHECK(min_gap(far, s.d_E, s.v_E, 3, 0.0, c.safety, c.t_h, c.dt) == kNoConflictGap);

    // Surrounding vehicle settled in the ramp lane 50 m ahead at the ego's speed.
    TrajectoryParams w;
    w.route = RouteId::Route2;
    w.d_lc1 = 350.0;
    w.d_lc2 = 420.0;
    w.v_d = 25.0;
    SystemState p;
    p.d_S = 480.0;
    p.v_S = 25.0;
    p.l_S = 3.0;
    p.d_E = 430.0;
    p.v_E = 25.0;
    const auto ahead = occupancy_tube(p, w.route, point_dist(w), c.driver, c.geometry, c.t_h, c.dt);
    CHECK(min_gap(ahead, p.d_E, p.v_E, 3, 0.0, c.safety, c.t_h, c.dt) == doctest::Approx(50.0));
    CHECK_THROWS_AS(min_gap(ahead, p.d_E, p.v_E, 3, 3.5, c.safety, c.t_h, c.dt), std::invalid_argument);
}

TEST_CASE("min_gap equals the exhaustive optimum on a merge 20 m ahead") {
    // Ego 20 m behind a vehicle that merges into the ramp lane within 2 s,
    // a_t = a_max; oracle over every grid sequence on a 1 s horizon.
    const ScenarioConfig c;
    SystemState s;
    s.d_S = 400.0;
    s.v_S = 25.0;
    s.l_S = 2.0;
    s.d_E = 380.0;
    s.v_E = 25.0;
    TrajectoryParams w;
    w.route = RouteId::Route2;
    w.d_lc1 = 350.0;
    w.d_lc2 = 404.0; // merge starts within the first quarter second
    w.v_d = 25.0;
    auto dist = point_dist(w);
    dist.v_d = BoundedDist::truncated_normal(25.0, 0.5, 24.0, 26.0);
    const auto tube = occupancy_tube(s, w.route, dist, c.driver, c.geometry, 1.0, c.dt);
    REQUIRE(tube.occupies(3));
    const double g = min_gap(tube, s.d_E, s.v_E, 3, c.safety.a_max, c.safety, 1.0, c.dt);
    const auto o = checks::exhaustive_min_gap(tube, s.d_E, s.v_E, 3, c.safety.a_max, c.safety.accel_grid(), 10,
                                              c.dt, c.safety.v_limit);
    REQUIRE(o.complete);
    CHECK(std::abs(g - o.gap) < 1e-9);
    // A coarse grid, searched without pruning help from the fine one, agrees too.
    const auto coarse = checks::exhaustive_min_gap(tube, s.d_E, s.v_E, 3, c.safety.a_max, {-6.0, -3.0, 0.0, 3.0}, 10,
                                                   c.dt, c.safety.v_limit);
    CHECK(std::abs(g - coarse.gap) < 1e-9);
}

TEST_CASE("restricted and exhaustive min_gap agree on small random instances") {
    const ScenarioConfig c;
    Rng rng = make_stream({31337});
    for (int i = 0; i < 40; ++i) {
        const auto in = checks::random_gap_instance(c, rng, 1.0);
        const double g = min_gap(in.tube, in.state.d_E, in.state.v_E, in.state.l_E, in.a_t, c.safety, 1.0, c.dt);
        const auto o = checks::exhaustive_min_gap(in.tube, in.state.d_E, in.state.v_E, in.state.l_E, in.a_t,
                                                  c.safety.accel_grid(), 10, c.dt, c.safety.v_limit);
        REQUIRE(o.complete);
        CHECK_MESSAGE(std::abs(g - o.gap) < 1e-9, "instance " << i);
    }
}

TEST_CASE("tube soundness on seeded ground truths") {
    const ScenarioConfig c;
    checks::SoundnessReport rep;
    for (std::uint64_t seed = 0; seed < 40; ++seed) checks::check_tube_soundness(c, seed, rep);
    CHECK(rep.cells_checked > 100000);
    CHECK_MESSAGE(rep.violations == 0, rep.first_violation);
}

TEST_CASE("tube monotonicity on seeded ground truths") {
    const ScenarioConfig c;
    checks::MonotonicityReport rep;
    for (std::uint64_t seed = 0; seed < 10; ++seed) checks::check_tube_monotonicity(c, seed, rep);
    CHECK(rep.comparisons > 1000);
    CHECK_MESSAGE(rep.violations == 0, rep.first_violation);
}

TEST_CASE("containment check detects a shifted-out cell") {
    OccupancyTube outer(3, 4), inner(2, 4);
    outer.cell(1, 2) = {true, 10.0, 20.0};
    outer.cell(2, 2) = {true, 12.0, 22.0};
    inner.cell(0, 2) = {true, 11.0, 19.0};
    inner.cell(1, 2) = {true, 12.0, 22.0};
    CHECK(inner.contained_in_shifted(outer, 1, 0.0));
    inner.cell(1, 2).hi = 22.5;
    CHECK_FALSE(inner.contained_in_shifted(outer, 1, 0.0));
    inner.cell(1, 2).hi = 22.0;
    inner.cell(0, 1) = {true, 11.0, 12.0};
    CHECK_FALSE(inner.contained_in_shifted(outer, 1, 0.0));
}

} // TEST_SUITE
