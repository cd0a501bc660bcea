#include "spap/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spap/vehicle_dynamics.hpp"

namespace spap {

std::vector<RouteTube> build_route_tubes(const SystemState& state, const Prediction& adapted,
                                         const ScenarioConfig& cfg) {
    std::vector<RouteTube> out;
    for (const auto& e : adapted.entries) {
        // Routes with zero probability are outside the prediction's support.
        if (!(e.prob > 0.0)) continue;
        RouteTube rt;
        rt.route = e.route;
        rt.prob = e.prob;
        rt.dist = e.dist;
        rt.tube = occupancy_tube(state, e.route, e.dist, cfg.driver, cfg.geometry, cfg.t_h, cfg.dt);
        out.push_back(std::move(rt));
    }
    std::sort(out.begin(), out.end(),
              [](const RouteTube& a, const RouteTube& b) { return route_index(a.route) < route_index(b.route); });
    return out;
}

SafetyResult safety_eval(const SystemState& state, const std::vector<RouteTube>& routes, double a_t,
                         const ScenarioConfig& cfg) {
    SafetyResult r;
    for (const auto& rt : routes) {
        const double g = min_gap(rt.tube, state.d_E, state.v_E, state.l_E, a_t, cfg.safety, cfg.t_h, cfg.dt);
        r.dd = std::min(r.dd, g);
    }
    r.theta = r.dd <= cfg.safety.dd_s ? 1 : 0;
    return r;
}

SafetyResult safety_eval(const SystemState& state, const Prediction& pred, double a_t, const ScenarioConfig& cfg) {
    const Prediction adapted = adapt(pred, state, cfg.geometry);
    return safety_eval(state, build_route_tubes(state, adapted, cfg), a_t, cfg);
}

namespace {

struct SampleTrack {
    std::vector<double> x;
    std::vector<char> conflict; // surrounding vehicle occupies the ego lane
    int last = 0;               // last conflicting step, 0 when none
};

SampleTrack simulate_sample(const SystemState& state, const TrajectoryParams& params, const ScenarioConfig& cfg) {
    const int K = cfg.lookahead_steps();
    const int n_lc = cfg.change_steps();
    SampleTrack tr;
    tr.x.assign(static_cast<std::size_t>(K + 1), 0.0);
    tr.conflict.assign(static_cast<std::size_t>(K + 1), 0);
    LanePhase ph = decode_phase(state.l_S, state.exited_S, n_lc);
    double d = state.d_S, v = state.v_S;
    tr.x[0] = d;
    tr.conflict[0] = ph.occupancy().contains(state.l_E);
    for (int k = 1; k <= K; ++k) {
        if (!ph.exited) {
            surrounding_kinematics(d, v, params.v_d, cfg.driver, cfg.dt);
            ph = advance_phase(ph, params, cfg.geometry, d, n_lc);
        }
        tr.x[static_cast<std::size_t>(k)] = d;
        const bool c = ph.occupancy().contains(state.l_E);
        tr.conflict[static_cast<std::size_t>(k)] = c;
        if (c) tr.last = k;
    }
    return tr;
}

// Smallest |d_E - x_S| over conflicting steps j+1..last when the ego at step j
// applies `a` once and then `follow`. Stops early once the gap drops to
// `stop_at` or below, since callers only compare against a threshold.
double continuation_gap(const SampleTrack& tr, int j, double d, double v, double a, double follow,
                        const ScenarioConfig& cfg, double stop_at = -1.0) {
    double gap = std::numeric_limits<double>::infinity();
    for (int k = j + 1; k <= tr.last; ++k) {
        ego_kinematics(d, v, k == j + 1 ? a : follow, cfg.dt, cfg.safety.v_limit);
        if (tr.conflict[static_cast<std::size_t>(k)]) {
            gap = std::min(gap, std::abs(d - tr.x[static_cast<std::size_t>(k)]));
            if (gap <= stop_at) return gap;
        }
    }
    return gap;
}

// True when, from (d, v) at step j, applying `first` for n_first steps and
// `follow` afterwards keeps the ego more than d_m behind the sample at every
// conflicting step after j. Ego positions are pointwise non-decreasing in both
// `first` and n_first (first >= follow), so this predicate is monotone, which
// lets the greedy rule skip ahead by bisection without changing its choices.
bool stays_behind(const SampleTrack& tr, int j, double d, double v, double first, int n_first, double follow,
                  const ScenarioConfig& cfg) {
    const double d_m = cfg.safety.d_m;
    for (int k = j + 1; k <= tr.last; ++k) {
        ego_kinematics(d, v, k - j <= n_first ? first : follow, cfg.dt, cfg.safety.v_limit);
        if (tr.conflict[static_cast<std::size_t>(k)] && !(tr.x[static_cast<std::size_t>(k)] - d > d_m)) return false;
    }
    return true;
}

// True when some conflicting step after j traps every ego position reachable
// by applying an action in [a_lo, a_hi] once and any acceleration afterwards
// within d_m of the sample. Positions are monotone in every applied
// acceleration, so the band between (a_lo, then a_min) and (a_hi, then
// a_max) bounds them all; any such action then violates the gap.
bool band_blocked(const SampleTrack& tr, int j, double d, double v, double a_lo, double a_hi,
                  const ScenarioConfig& cfg) {
    const double d_m = cfg.safety.d_m;
    double d_lo = d, v_lo = v, d_hi = d, v_hi = v;
    for (int k = j + 1; k <= tr.last; ++k) {
        const bool first = k == j + 1;
        ego_kinematics(d_lo, v_lo, first ? a_lo : cfg.safety.a_min, cfg.dt, cfg.safety.v_limit);
        ego_kinematics(d_hi, v_hi, first ? a_hi : cfg.safety.a_max, cfg.dt, cfg.safety.v_limit);
        if (!tr.conflict[static_cast<std::size_t>(k)]) continue;
        const double x = tr.x[static_cast<std::size_t>(k)];
        if (d_lo >= x - d_m && d_hi <= x + d_m) return true;
        // The band only widens; once it spans more than the trap it never fits.
        if (d_hi - d_lo > 2.0 * d_m) return false;
    }
    return false;
}

// First index in [0, n) where the monotone predicate turns true (n if never),
// searched outward from `hint`: the boundary moves little between steps.
template <class Pred>
std::size_t partition_point_from(std::size_t hint, std::size_t n, Pred pred) {
    hint = std::min(hint, n);
    std::size_t lo = 0, hi = n; // answer lies in [lo, hi]
    if (hint < n && pred(hint)) {
        hi = hint;
        for (std::size_t step = 1; hi > 0; step *= 2) {
            const std::size_t probe = hi > step ? hi - step : 0;
            if (!pred(probe)) {
                lo = probe + 1;
                break;
            }
            hi = probe;
        }
    } else {
        lo = hint < n ? hint + 1 : n;
        for (std::size_t step = 1; lo < n; step *= 2) {
            const std::size_t probe = std::min(n - 1, lo + step - 1);
            if (pred(probe)) {
                hi = probe;
                break;
            }
            lo = probe + 1;
        }
    }
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (pred(mid)) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

// Every conflicting step from 1 on keeps the ego profile further than d_m from
// every tube interval in its lane.
bool clears_tube(const OccupancyTube& tube, const std::vector<double>& ego, int l_E, double d_m) {
    for (int k = 1; k < tube.steps(); ++k) {
        const TubeCell& c = tube.cell(k, l_E);
        if (c.occupied && !(interval_distance(ego[static_cast<std::size_t>(k)], c.lo, c.hi) > d_m)) return false;
    }
    return true;
}

} // namespace

double free_road_q(const SystemState& state, double a_t, const ScenarioConfig& cfg) {
    const int K = cfg.lookahead_steps();
    double d = state.d_E, v = state.v_E, q = 0.0;
    for (int k = 1; k <= K; ++k) {
        ego_kinematics(d, v, k == 1 ? a_t : cfg.safety.a_max, cfg.dt, cfg.safety.v_limit);
        q += v;
    }
    return q;
}

double inner_q(const SystemState& state, double a_t, const TrajectoryParams& params, const ScenarioConfig& cfg) {
    const SampleTrack tr = simulate_sample(state, params, cfg);
    const int K = cfg.lookahead_steps();
    const double d_m = cfg.safety.d_m;
    const double a_max = cfg.safety.a_max;
    const double a_min = cfg.safety.a_min;

    // The free-road profile is what the greedy rule produces whenever it stays
    // clear, since a_max with an a_max continuation is then always admissible.
    if (tr.last == 0 || continuation_gap(tr, 0, state.d_E, state.v_E, a_t, a_max, cfg, d_m) > d_m)
        return free_road_q(state, a_t, cfg);

    std::vector<double> grid = cfg.safety.accel_grid();
    std::reverse(grid.begin(), grid.end()); // largest first

    double d = state.d_E, v = state.v_E, q = 0.0;
    auto advance = [&](double a) {
        ego_kinematics(d, v, a, cfg.dt, cfg.safety.v_limit);
        q += v;
    };
    advance(a_t);
    int j = 1;
    std::size_t behind_hint = grid.size() / 2, first_hint = 0;
    while (j < K) {
        if (j >= tr.last) {
            advance(a_max);
            ++j;
            continue;
        }
        // a_max followed by braking stays behind: a_max is the greedy choice
        // here and at every later step up to the longest such run, found by
        // bisection on the run length.
        if (stays_behind(tr, j, d, v, a_max, 1, a_min, cfg)) {
            int lo = 1, hi = tr.last - j;
            while (lo < hi) {
                const int mid = (lo + hi + 1) / 2;
                if (stays_behind(tr, j, d, v, a_max, mid, a_min, cfg)) lo = mid;
                else hi = mid - 1;
            }
            for (int i = 0; i < lo && j < K; ++i, ++j) advance(a_max);
            continue;
        }
        // Largest candidate whose braking continuation stays behind; every
        // smaller one is admissible too, so only larger ones need a full check.
        behind_hint = partition_point_from(behind_hint, grid.size(), [&](std::size_t i) {
            return stays_behind(tr, j, d, v, grid[i], 1, a_min, cfg);
        });
        const std::size_t behind_idx = behind_hint;
        // Candidates before `first` are all trapped together; trapping the
        // band from a candidate up to a_max is monotone, so search for it.
        first_hint = partition_point_from(first_hint, behind_idx, [&](std::size_t i) {
            return !band_blocked(tr, j, d, v, grid[i], grid[0], cfg);
        });
        const std::size_t first = first_hint;
        // Braking is the fallback when no candidate keeps the gap; that only
        // happens for samples a safe first action cannot accommodate.
        double chosen = a_min;
        for (std::size_t i = first; i < grid.size(); ++i) {
            const double a = grid[i];
            if (i >= behind_idx) {
                chosen = a;
                break;
            }
            if (band_blocked(tr, j, d, v, a, a, cfg)) continue;
            // Try the continuation most likely to succeed first; the result
            // does not depend on the order.
            const bool ahead = d >= tr.x[static_cast<std::size_t>(j)];
            double g = -1.0;
            for (double follow : {ahead ? a_max : a_min, a, ahead ? a_min : a_max}) {
                g = std::max(g, continuation_gap(tr, j, d, v, a, follow, cfg, d_m));
                if (g > d_m) break;
            }
            if (g > d_m) {
                chosen = a;
                break;
            }
        }
        advance(chosen);
        ++j;
    }
    return q;
}

double expected_reward(const SystemState& state, const std::vector<RouteTube>& routes, double a_t,
                       const ScenarioConfig& cfg, const PlanKey& key) {
    double total_p = 0.0;
    for (const auto& rt : routes) total_p += rt.prob;
    if (routes.empty() || !(total_p > 0.0))
        throw ConservativenessViolation("expected_reward: no feasible route with positive probability");

    const int K = cfg.lookahead_steps();
    const auto free_profile = ego_profile(state.d_E, state.v_E, a_t, cfg.safety.a_max, K, cfg.dt, cfg.safety.v_limit);
    double free_q = std::numeric_limits<double>::quiet_NaN();
    double omega = 0.0;
    for (const auto& rt : routes) {
        double route_q = 0.0;
        if (clears_tube(rt.tube, free_profile, state.l_E, cfg.safety.d_m)) {
            // Every sampled trajectory lies inside the tube, so none constrains
            // the free-road profile.
            if (std::isnan(free_q)) free_q = free_road_q(state, a_t, cfg);
            route_q = free_q;
        } else {
            double sum = 0.0;
            for (int s = 0; s < cfg.N_s; ++s) {
                Rng rng = make_stream({key.seed, key.step, accel_key(a_t),
                                       static_cast<std::uint64_t>(route_index(rt.route)),
                                       static_cast<std::uint64_t>(s)});
                sum += inner_q(state, a_t, sample_params(rt.dist, rt.route, rng), cfg);
            }
            route_q = sum / cfg.N_s;
        }
        omega += rt.prob * route_q;
    }
    return omega / total_p;
}

double expected_reward(const SystemState& state, const Prediction& pred, double a_t, const ScenarioConfig& cfg,
                       const PlanKey& key) {
    const Prediction adapted = adapt(pred, state, cfg.geometry);
    return expected_reward(state, build_route_tubes(state, adapted, cfg), a_t, cfg, key);
}

double balance(double omega, double dd, const ScenarioConfig& cfg) {
    return omega + cfg.gap_weight * std::min(dd, cfg.gap_cap);
}

namespace {

bool prefer(double phi_new, double a_new, double phi_old, double a_old, TieBreak tb) {
    if (tb == TieBreak::LaterWins) return phi_new >= phi_old;
    if (phi_new != phi_old) return phi_new > phi_old;
    if (std::abs(a_new) != std::abs(a_old)) return std::abs(a_new) < std::abs(a_old);
    return a_new < a_old;
}

} // namespace

PlanResult plan(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg, const PlanKey& key) {
    const Prediction adapted = adapt(pred, state, cfg.geometry);
    const auto routes = build_route_tubes(state, adapted, cfg);

    PlanResult res; // u = 0, omega = 0, theta = 1, dd = 100
    double best_phi = 0.0;
    for (double a_t : cfg.safety.accel_grid()) {
        ActionEval ev;
        ev.a_t = a_t;
        const SafetyResult s = safety_eval(state, routes, a_t, cfg);
        ev.theta = s.theta;
        ev.dd = s.dd;
        ev.omega = std::numeric_limits<double>::quiet_NaN();
        ev.phi = std::numeric_limits<double>::quiet_NaN();
        if (s.theta == 0) {
            ev.omega = routes.empty() ? free_road_q(state, a_t, cfg) : expected_reward(state, routes, a_t, cfg, key);
            ev.phi = balance(ev.omega, ev.dd, cfg);
            if (res.theta == 1 || prefer(ev.phi, a_t, best_phi, res.u, cfg.planner.tie_break)) {
                res.u = a_t;
                res.omega = ev.omega;
                res.theta = 0;
                res.dd = ev.dd;
                best_phi = ev.phi;
            }
        }
        res.table.push_back(ev);
    }
    if (res.theta == 1 && cfg.planner.brake_fallback) res.u = cfg.safety.a_min;
    return res;
}

} // namespace spap
