#include "spap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "spap/rng.hpp"
#include "spap/vehicle_dynamics.hpp"

namespace spap {

namespace {

// Stream tags for the ground-truth draws of an episode.
enum : std::uint64_t { kTagRoute = 101, kTagAggr, kTagNoise1, kTagNoise2, kTagDesired, kTagInitial };

} // namespace

GroundTruth draw_ground_truth(const ScenarioConfig& cfg, std::uint64_t seed, bool misspecified, double noise_scale) {
    const auto& m = cfg.driver;
    GroundTruth gt;

    Rng r_route = make_stream({seed, kTagRoute});
    const double u = uniform01(r_route);
    const auto& p = cfg.route_probs;
    gt.route = u < p[0] ? RouteId::Route1 : (u < p[0] + p[1] ? RouteId::Route2 : RouteId::Route3);

    Rng r_q = make_stream({seed, kTagAggr});
    gt.q_a = uniform(r_q, m.q_a_lo, m.q_a_hi);
    const double band = misspecified ? m.d_n_bound * noise_scale : m.d_n_bound;
    Rng r_n1 = make_stream({seed, kTagNoise1});
    Rng r_n2 = make_stream({seed, kTagNoise2});
    gt.noise1 = uniform(r_n1, -band, band);
    gt.noise2 = uniform(r_n2, -band, band);
    Rng r_v = make_stream({seed, kTagDesired});
    const double v_d = BoundedDist::truncated_normal(m.v_d, m.v_d_sigma, m.v_d_lo, m.v_d_hi).sample(r_v);

    if (misspecified) {
        SurroundingDriverModel wide = m;
        wide.d_n_bound = band;
        gt.params = make_trajectory_params(gt.route, wide, cfg.geometry, gt.q_a, gt.noise1, gt.noise2, v_d);
    } else {
        gt.params = make_trajectory_params(gt.route, m, cfg.geometry, gt.q_a, gt.noise1, gt.noise2, v_d);
    }

    gt.initial = cfg.initial_state;
    gt.initial.t = 0.0;
    gt.initial.l_S = static_cast<double>(kStartLane);
    gt.initial.exited_S = false;
    if (cfg.randomize.enabled) {
        const auto& z = cfg.randomize;
        Rng r_i = make_stream({seed, kTagInitial});
        gt.initial.d_S = uniform(r_i, z.d_S0.lo, z.d_S0.hi);
        gt.initial.d_E = gt.initial.d_S - uniform(r_i, z.gap0.lo, z.gap0.hi);
        gt.initial.v_E = uniform(r_i, z.v_E0.lo, z.v_E0.hi);
        gt.initial.v_S = uniform(r_i, z.v_S0.lo, z.v_S0.hi);
    }
    return gt;
}

bool in_collision(const SystemState& s, double d_m) {
    return surrounding_occupancy(s).contains(s.l_E) && std::abs(s.d_E - s.d_S) < d_m;
}

EpisodeResult run_episode(const ScenarioConfig& cfg, const std::string& planner_name, std::uint64_t seed,
                          const EpisodeOptions& opts) {
    validate(cfg);
    EpisodeResult ep;
    ep.planner = planner_name;
    ep.seed = seed;
    ep.truth = draw_ground_truth(cfg, seed, opts.misspecified, opts.misspecified_noise_scale);
    const auto planner = make_planner(planner_name, ep.truth.q_a);

    Prediction pred = make_prediction(cfg);
    if (!opts.misspecified) {
        const PredictionEntry* e = pred.find(ep.truth.route);
        if (!e || !(e->prob > 0.0) || !(e->dist.density(ep.truth.params) > 0.0))
            throw ConservativenessViolation("ground truth has zero density under the initial prediction");
    }
    pred = planner->prepare(pred, cfg);

    const int N = cfg.episode_steps();
    const double d_m = cfg.safety.d_m;
    SystemState state = ep.truth.initial;
    ep.steps = N;
    ep.states.reserve(static_cast<std::size_t>(N + 1));
    ep.plan_times_s.reserve(static_cast<std::size_t>(N));

    auto observe = [&](const SystemState& s, int k) {
        ep.states.push_back(s);
        if (surrounding_occupancy(s).contains(s.l_E))
            ep.min_realized_gap = std::min(ep.min_realized_gap, std::abs(s.d_E - s.d_S));
        if (in_collision(s, d_m) && !ep.collided) {
            ep.collided = true;
            ep.first_collision_step = k;
        }
    };
    observe(state, 0);

    double speed_sum = 0.0;
    for (int k = 0; k < N; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        PlannerStep st;
        bool adapted = true;
        if (planner->uses_prediction()) {
            try {
                pred = adapt(pred, state, cfg.geometry);
            } catch (const ConservativenessViolation&) {
                if (!opts.misspecified) throw;
                adapted = false; // only reachable with a misspecified ground truth
            }
        }
        if (adapted) {
            st = planner->act(state, pred, cfg, PlanKey{seed, static_cast<std::uint64_t>(k)});
        } else {
            st.u = cfg.safety.a_min;
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ep.plan_times_s.push_back(elapsed);
        if (st.leader) ++ep.leader_steps;

        if (opts.keep_trace) {
            TraceStep ts;
            ts.step = k;
            ts.state = state;
            ts.u = st.u;
            ts.plan_time_s = elapsed;
            ts.leader = st.leader;
            ts.has_plan = st.has_plan;
            ts.plan = std::move(st.plan);
            if (planner->uses_prediction()) ts.prediction = pred.entries;
            ep.trace.push_back(std::move(ts));
        }

        SystemState next = step_surrounding(state, ep.truth.params, cfg.driver, cfg.geometry, cfg.dt);
        state = step_ego(next, st.u, cfg.dt, cfg.safety);
        speed_sum += state.v_E;
        observe(state, k + 1);
    }
    ep.avg_speed = N > 0 ? speed_sum / N : state.v_E;
    ep.final_speed = state.v_E;
    return ep;
}

Metrics aggregate(const std::string& planner, const std::vector<EpisodeResult>& episodes) {
    if (episodes.empty()) throw std::invalid_argument("aggregate: no episodes");
    Metrics m;
    m.planner = planner;
    m.n = static_cast<int>(episodes.size());
    double speed = 0.0, final_speed = 0.0;
    long long steps = 0, leader = 0;
    std::vector<double> times;
    for (const auto& e : episodes) {
        if (e.collided) ++m.collisions;
        speed += e.avg_speed;
        final_speed += e.final_speed;
        steps += e.steps;
        leader += e.leader_steps;
        times.insert(times.end(), e.plan_times_s.begin(), e.plan_times_s.end());
    }
    m.safety_rate = 1.0 - static_cast<double>(m.collisions) / m.n;
    m.avg_speed = speed / m.n;
    m.final_speed = final_speed / m.n;
    m.leader_rate = steps > 0 ? static_cast<double>(leader) / static_cast<double>(steps) : 0.0;
    if (!times.empty()) {
        double sum = 0.0;
        for (double t : times) sum += t;
        m.mean_plan_time_s = sum / static_cast<double>(times.size());
        const std::size_t idx =
            std::min(times.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(times.size()))) - 1);
        std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(idx), times.end());
        m.p95_plan_time_s = times[idx];
    }
    return m;
}

std::vector<EpisodeResult> run_episodes(const ScenarioConfig& cfg, const std::string& planner, int n,
                                        std::uint64_t base_seed, const BatchOptions& opts) {
    if (n < 1) throw std::invalid_argument("batch size must be at least 1");
    if (!is_planner_name(planner)) make_planner(planner); // throws with the list of valid names
    validate(cfg);
    std::vector<EpisodeResult> out(static_cast<std::size_t>(n));
    const int jobs = std::clamp(opts.jobs, 1, n);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::mutex report_mutex;
    int finished = 0;
    auto worker = [&] {
        for (int i = next++; i < n && !failed; i = next++) {
            try {
                auto& slot = out[static_cast<std::size_t>(i)];
                slot = run_episode(cfg, planner, base_seed + static_cast<std::uint64_t>(i), opts.episode);
                if (opts.progress || opts.on_episode) {
                    std::lock_guard<std::mutex> lock(report_mutex);
                    ++finished;
                    if (opts.on_episode) opts.on_episode(slot);
                    if (opts.progress) opts.progress(finished, n);
                }
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

Metrics run_batch(const ScenarioConfig& cfg, const std::string& planner, int n, std::uint64_t base_seed,
                  const BatchOptions& opts) {
    return aggregate(planner, run_episodes(cfg, planner, n, base_seed, opts));
}

std::vector<SweepP1Row> sweep_p1(const ScenarioConfig& cfg, const std::vector<std::string>& planners,
                                 const std::vector<double>& grid, int n, std::uint64_t base_seed,
                                 const BatchOptions& opts) {
    for (double p1 : grid)
        if (p1 < -1e-9 || p1 > 0.8 + 1e-9) throw std::invalid_argument("p1 must lie in [0, 0.8]");
    std::vector<SweepP1Row> rows;
    for (double p1 : grid) {
        ScenarioConfig c = cfg;
        const double q = std::clamp(p1, 0.0, 0.8);
        c.route_probs = {q, std::max(0.0, 0.8 - q), 0.2};
        for (const auto& name : planners) rows.push_back({q, run_batch(c, name, n, base_seed, opts)});
    }
    return rows;
}

std::vector<SweepNsRow> sweep_ns(const ScenarioConfig& cfg, const std::vector<int>& grid, int n,
                                 std::uint64_t base_seed, const BatchOptions& opts) {
    for (int ns : grid)
        if (ns < 1) throw std::invalid_argument("N_s must be at least 1");
    std::vector<SweepNsRow> rows;
    for (int ns : grid) {
        ScenarioConfig c = cfg;
        c.N_s = ns;
        c.route_probs = {0.4, 0.4, 0.2};
        rows.push_back({ns, run_batch(c, "spap", n, base_seed, opts)});
    }
    return rows;
}

std::vector<double> parse_grid(const std::string& spec) {
    double lo = 0.0, hi = 0.0, step = 0.0;
    char c1 = 0, c2 = 0;
    int consumed = 0;
    if (std::sscanf(spec.c_str(), "%lf%c%lf%c%lf%n", &lo, &c1, &hi, &c2, &step, &consumed) != 5 || c1 != ':' ||
        c2 != ':' || consumed != static_cast<int>(spec.size()))
        throw std::invalid_argument("grid must look like lo:hi:step, got '" + spec + "'");
    if (!(step > 0.0) || hi < lo) throw std::invalid_argument("grid needs step > 0 and hi >= lo");
    const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 100000) throw std::invalid_argument("grid has too many points");
    std::vector<double> out;
    for (long long i = 0; i < count; ++i) {
        // Round to 12 decimals so 0.1 steps print as 0.3 rather than 0.30000000000000004.
        const double x = lo + static_cast<double>(i) * step;
        out.push_back(std::round(x * 1e12) / 1e12);
    }
    return out;
}

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::string fmt_time(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6e", x);
    return buf;
}

void metrics_cols(std::ostream& os, const Metrics& m, bool timing) {
    os << m.n << ',' << m.collisions << ',' << fmt(m.safety_rate) << ',' << fmt(m.avg_speed) << ','
       << fmt(m.final_speed) << ',' << fmt(m.leader_rate);
    if (timing) os << ',' << fmt_time(m.mean_plan_time_s) << ',' << fmt_time(m.p95_plan_time_s);
    os << '\n';
}

const char* metrics_header(bool timing) {
    return timing ? "n,collisions,safety_rate,avg_speed,final_speed,leader_rate,mean_plan_time_s,p95_plan_time_s\n"
                  : "n,collisions,safety_rate,avg_speed,final_speed,leader_rate\n";
}

} // namespace

void write_metrics_csv(std::ostream& os, const std::vector<Metrics>& rows, bool timing) {
    os << "schema_version,planner," << metrics_header(timing);
    for (const auto& m : rows) {
        os << kResultSchemaVersion << ',' << m.planner << ',';
        metrics_cols(os, m, timing);
    }
}

void write_sweep_p1_csv(std::ostream& os, const std::vector<SweepP1Row>& rows, bool timing) {
    os << "schema_version,p1,p2,p3,planner," << metrics_header(timing);
    for (const auto& r : rows) {
        os << kResultSchemaVersion << ',' << fmt(r.p1) << ',' << fmt(std::max(0.0, 0.8 - r.p1)) << ',' << fmt(0.2)
           << ',' << r.metrics.planner << ',';
        metrics_cols(os, r.metrics, timing);
    }
}

void write_sweep_ns_csv(std::ostream& os, const std::vector<SweepNsRow>& rows, bool timing) {
    os << "schema_version,N_s,planner," << metrics_header(timing);
    for (const auto& r : rows) {
        os << kResultSchemaVersion << ',' << r.N_s << ',' << r.metrics.planner << ',';
        metrics_cols(os, r.metrics, timing);
    }
}

void write_tubes_csv(std::ostream& os, const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg) {
    const Prediction adapted = adapt(pred, state, cfg.geometry);
    os << "schema_version,route,step,lane,lo,hi\n";
    for (const auto& rt : build_route_tubes(state, adapted, cfg)) {
        const std::string label = std::to_string(kResultSchemaVersion) + "," + route_name(rt.route);
        rt.tube.dump_csv(os, label.c_str());
    }
}

namespace {

using nlohmann::json;

json state_json(const SystemState& s) {
    return {{"t", s.t},     {"d_E", s.d_E}, {"v_E", s.v_E}, {"l_E", s.l_E},
            {"d_S", s.d_S}, {"v_S", s.v_S}, {"l_S", s.l_S}, {"exited_S", s.exited_S}};
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

} // namespace

std::string episode_to_json(const EpisodeResult& ep, int indent) {
    json j;
    j["schema_version"] = kResultSchemaVersion;
    j["planner"] = ep.planner;
    j["seed"] = ep.seed;
    j["truth"] = {{"route", route_name(ep.truth.route)},
                  {"q_a", ep.truth.q_a},
                  {"noise1", ep.truth.noise1},
                  {"noise2", ep.truth.noise2},
                  {"d_lc1", ep.truth.params.d_lc1},
                  {"d_lc2", ep.truth.params.d_lc2},
                  {"v_d", ep.truth.params.v_d},
                  {"initial", state_json(ep.truth.initial)}};
    j["collided"] = ep.collided;
    j["first_collision_step"] = ep.first_collision_step;
    j["min_realized_gap"] = ep.min_realized_gap;
    j["avg_speed"] = ep.avg_speed;
    j["final_speed"] = ep.final_speed;
    j["leader_steps"] = ep.leader_steps;
    json steps = json::array();
    for (const auto& ts : ep.trace) {
        json s;
        s["step"] = ts.step;
        s["state"] = state_json(ts.state);
        s["u"] = ts.u;
        s["plan_time_s"] = ts.plan_time_s;
        s["leader"] = ts.leader;
        if (!ts.prediction.empty()) {
            json probs = json::object();
            for (const auto& e : ts.prediction) probs[route_name(e.route)] = e.prob;
            s["route_probs"] = probs;
        }
        if (ts.has_plan) {
            s["omega"] = ts.plan.omega;
            s["theta"] = ts.plan.theta;
            s["dd"] = ts.plan.dd;
            json table = json::array();
            for (const auto& a : ts.plan.table)
                table.push_back({{"a_t", a.a_t},
                                 {"theta", a.theta},
                                 {"dd", a.dd},
                                 {"omega", number_or_null(a.omega)},
                                 {"phi", number_or_null(a.phi)}});
            s["actions"] = table;
        }
        steps.push_back(s);
    }
    j["trace"] = steps;
    return j.dump(indent);
}

} // namespace spap
