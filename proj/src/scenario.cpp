#include "spap/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spap {

using nlohmann::json;

std::vector<int> RoadGeometry::lane_ids() const {
    std::vector<int> ids(static_cast<std::size_t>(lane_count));
    for (int i = 0; i < lane_count; ++i) ids[static_cast<std::size_t>(i)] = i;
    return ids;
}

std::vector<int> LaneSet::lanes() const {
    std::vector<int> out;
    for (int i = 0; i < 8; ++i)
        if (contains(i)) out.push_back(i);
    return out;
}

std::string LaneSet::to_string() const {
    std::string s = "{";
    bool first = true;
    for (int l : lanes()) {
        if (!first) s += ",";
        s += std::to_string(l);
        first = false;
    }
    return s + "}";
}

LaneSet surrounding_occupancy(const SystemState& s) {
    if (s.exited_S) return {};
    const double base = std::floor(s.l_S);
    const int lane = static_cast<int>(base);
    if (s.l_S == base) return LaneSet::of(lane);
    return LaneSet::of(lane) | LaneSet::of(lane + 1);
}

std::string route_name(RouteId r) {
    switch (r) {
    case RouteId::Route1: return "route1";
    case RouteId::Route2: return "route2";
    case RouteId::Route3: return "route3";
    }
    return "?";
}

RouteId route_from_name(const std::string& name) {
    for (auto r : kAllRoutes)
        if (route_name(r) == name) return r;
    throw std::invalid_argument("unknown route: " + name);
}

std::vector<double> SafetyParams::accel_grid() const {
    std::vector<double> grid;
    if (!(da > 0.0) || a_max < a_min) return grid;
    const auto n = static_cast<int>(std::floor((a_max - a_min) / da + 1e-9));
    grid.reserve(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) grid.push_back(a_min + i * da);
    return grid;
}

bool divides(double step, double span) {
    if (!(step > 0.0) || !(span > 0.0)) return false;
    const double q = span / step;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q);
}

int ScenarioConfig::episode_steps() const { return static_cast<int>(std::lround(horizon / dt)); }
int ScenarioConfig::lookahead_steps() const { return static_cast<int>(std::lround(t_h / dt)); }
int ScenarioConfig::change_steps() const {
    return std::max(1, static_cast<int>(std::lround(driver.tau_lc / dt)));
}

namespace {

std::string join_lines(const std::vector<std::string>& v) {
    std::string s = "invalid scenario config:";
    for (const auto& p : v) s += "\n  - " + p;
    return s;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

std::vector<std::string> check(const ScenarioConfig& c) {
    std::vector<std::string> out;
    auto need = [&](bool ok, std::string msg) {
        if (!ok) out.push_back(std::move(msg));
    };
    const auto& g = c.geometry;
    need(c.schema_version == kScenarioSchemaVersion,
         "schema_version " + std::to_string(c.schema_version) + " is not supported");
    need(g.lane_count >= 2 && g.lane_count <= 8, "lane_count must be in [2, 8]");
    need(g.offramp_lane == g.lane_count - 1, "offramp_lane must be the highest lane id");
    need(0.0 < g.offramp_start && g.offramp_start < g.offramp_end && g.offramp_end <= g.highway_length,
         "geometry must satisfy 0 < offramp_start < offramp_end <= highway_length");
    need(g.offramp_margin >= 0.0 && g.offramp_end - g.offramp_margin > g.offramp_start,
         "offramp_margin must leave a non-empty exit window");

    const auto& s = c.safety;
    need(0.0 < s.d_m && s.d_m <= s.dd_s, "safety must satisfy 0 < d_m <= dd_s");
    need(s.a_min < 0.0 && 0.0 < s.a_max, "safety must satisfy a_min < 0 < a_max");
    need(s.da > 0.0, "da must be positive");
    need(s.v_limit > 0.0, "v_limit must be positive");
    if (s.da > 0.0 && s.a_min < 0.0 && s.a_max > 0.0) {
        need(divides(s.da, s.a_max - s.a_min), "da must divide a_max - a_min");
        need(divides(s.da, -s.a_min), "da must divide -a_min so that 0 is on the grid");
    }

    need(c.dt > 0.0 && c.horizon > 0.0 && c.t_h > 0.0, "dt, horizon and t_h must be positive");
    need(divides(c.dt, c.horizon), "dt must divide horizon exactly");
    need(divides(c.dt, c.t_h), "dt must divide t_h exactly");

    double sum = 0.0;
    bool nonneg = true;
    for (double p : c.route_probs) {
        sum += p;
        nonneg = nonneg && p >= 0.0;
    }
    need(nonneg, "route probabilities must be non-negative");
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "route probabilities sum to " << sum << ", expected 1";
        out.push_back(os.str());
    }

    const auto& d = c.driver;
    need(d.q_a >= -1.0 && d.q_a <= 1.0, "driver q_a must be in [-1, 1]");
    need(-1.0 <= d.q_a_lo && d.q_a_lo <= d.q_a_hi && d.q_a_hi <= 1.0,
         "driver q_a range must lie in [-1, 1]");
    need(d.d_a < 0.0, "driver d_a must be negative");
    need(d.tau_lc > 0.0, "driver tau_lc must be positive");
    need(d.d_n_bound >= 0.0, "driver d_n_bound must be non-negative");
    need(d.d_a + d.d_c - d.d_n_bound > 0.0, "driver gaps must stay positive: d_a + d_c - d_n_bound > 0");
    need(d.k_v > 0.0 && d.k_v * c.dt <= 1.0, "driver k_v must be positive with k_v * dt <= 1");
    need(d.a_bound_S > 0.0, "driver a_bound_S must be positive");
    need(d.v_d_lo <= d.v_d && d.v_d <= d.v_d_hi && d.v_d_lo >= 0.0, "driver v_d must lie in [v_d_lo, v_d_hi]");
    need(d.v_d_sigma > 0.0, "driver v_d_sigma must be positive");
    need(d.d_lc0 > 0.0, "driver d_lc0 must be positive");
    need(d.d_lc0 + 2.0 * d.gap_max() <= g.offramp_end - g.offramp_margin,
         "d_lc0 must leave room for both lane changes before the exit window closes");

    const auto& is = c.initial_state;
    need(is.v_E >= 0.0 && is.v_S >= 0.0, "initial speeds must be non-negative");
    need(is.l_E >= 0 && is.l_E < g.lane_count, "initial l_E must be a lane id");
    need(is.l_S == static_cast<double>(1) && !is.exited_S, "surrounding vehicle must start settled in lane 1");
    need(is.d_S < d.d_lc0, "surrounding vehicle must start before d_lc0");
    const auto& r = c.randomize;
    if (r.enabled) {
        for (const Range* rg : {&r.d_S0, &r.gap0, &r.v_E0, &r.v_S0})
            need(rg->lo <= rg->hi, "randomisation ranges must have lo <= hi");
        need(r.d_S0.hi < d.d_lc0, "randomised d_S0 must stay before d_lc0");
        need(r.v_E0.lo >= 0.0 && r.v_S0.lo >= 0.0, "randomised speeds must be non-negative");
    }

    need(c.N_s >= 1, "N_s must be at least 1");
    need(c.gap_weight >= 0.0 && c.gap_cap >= 0.0, "gap_weight and gap_cap must be non-negative");
    const auto& idm = c.idm;
    need(idm.v0 > 0 && idm.T > 0 && idm.s0 > 0 && idm.a > 0 && idm.b > 0 && idm.delta > 0 && idm.hard_brake > 0,
         "IDM parameters must be positive");
    return out;
}

const ScenarioConfig& validate(const ScenarioConfig& config) {
    auto problems = check(config);
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return config;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <class T>
void get_opt(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
void range_from(const json& j, const char* key, Range& r) {
    if (auto it = j.find(key); it != j.end()) {
        r.lo = it->at(0).get<double>();
        r.hi = it->at(1).get<double>();
    }
}

std::string tie_break_name(TieBreak t) { return t == TieBreak::LaterWins ? "later_wins" : "smaller_magnitude"; }
TieBreak tie_break_from(const std::string& s) {
    if (s == "later_wins") return TieBreak::LaterWins;
    if (s == "smaller_magnitude") return TieBreak::SmallerMagnitude;
    throw std::invalid_argument("unknown tie_break: " + s);
}

} // namespace

std::string to_json(const ScenarioConfig& c, int indent) {
    json j;
    j["schema_version"] = c.schema_version;
    const auto& g = c.geometry;
    j["geometry"] = {{"lane_count", g.lane_count},       {"offramp_lane", g.offramp_lane},
                     {"offramp_start", g.offramp_start}, {"offramp_end", g.offramp_end},
                     {"highway_length", g.highway_length}, {"offramp_margin", g.offramp_margin}};
    const auto& s = c.safety;
    j["safety"] = {{"d_m", s.d_m},     {"dd_s", s.dd_s}, {"a_min", s.a_min},
                   {"a_max", s.a_max}, {"da", s.da},     {"v_limit", s.v_limit}};
    j["horizon"] = c.horizon;
    j["dt"] = c.dt;
    j["t_h"] = c.t_h;
    const auto& is = c.initial_state;
    j["initial_state"] = {{"t", is.t},     {"d_E", is.d_E}, {"v_E", is.v_E}, {"l_E", is.l_E},
                          {"d_S", is.d_S}, {"v_S", is.v_S}, {"l_S", is.l_S}, {"exited_S", is.exited_S}};
    const auto& r = c.randomize;
    j["randomize"] = {{"enabled", r.enabled},
                      {"d_S0", range_json(r.d_S0)},
                      {"gap0", range_json(r.gap0)},
                      {"v_E0", range_json(r.v_E0)},
                      {"v_S0", range_json(r.v_S0)}};
    j["route_probs"] = c.route_probs;
    const auto& d = c.driver;
    j["driver"] = {{"v_d", d.v_d},     {"v_d_lo", d.v_d_lo}, {"v_d_hi", d.v_d_hi},       {"v_d_sigma", d.v_d_sigma},
                   {"k_v", d.k_v},     {"a_bound_S", d.a_bound_S}, {"q_a", d.q_a},       {"q_a_lo", d.q_a_lo},
                   {"q_a_hi", d.q_a_hi}, {"d_a", d.d_a},     {"d_c", d.d_c},             {"d_n_bound", d.d_n_bound},
                   {"tau_lc", d.tau_lc}, {"d_lc0", d.d_lc0}};
    j["N_s"] = c.N_s;
    j["seed"] = c.seed;
    j["gap_weight"] = c.gap_weight;
    j["gap_cap"] = c.gap_cap;
    j["planner"] = {{"brake_fallback", c.planner.brake_fallback}, {"tie_break", tie_break_name(c.planner.tie_break)}};
    const auto& idm = c.idm;
    j["idm"] = {{"v0", idm.v0}, {"T", idm.T},         {"s0", idm.s0},
                {"a", idm.a},   {"b", idm.b},         {"delta", idm.delta}, {"hard_brake", idm.hard_brake}};
    return j.dump(indent);
}

ScenarioConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    ScenarioConfig c;
    get_opt(j, "schema_version", c.schema_version);
    if (auto it = j.find("geometry"); it != j.end()) {
        auto& g = c.geometry;
        get_opt(*it, "lane_count", g.lane_count);
        get_opt(*it, "offramp_lane", g.offramp_lane);
        get_opt(*it, "offramp_start", g.offramp_start);
        get_opt(*it, "offramp_end", g.offramp_end);
        get_opt(*it, "highway_length", g.highway_length);
        get_opt(*it, "offramp_margin", g.offramp_margin);
    }
    if (auto it = j.find("safety"); it != j.end()) {
        auto& s = c.safety;
        get_opt(*it, "d_m", s.d_m);
        get_opt(*it, "dd_s", s.dd_s);
        get_opt(*it, "a_min", s.a_min);
        get_opt(*it, "a_max", s.a_max);
        get_opt(*it, "da", s.da);
        get_opt(*it, "v_limit", s.v_limit);
    }
    get_opt(j, "horizon", c.horizon);
    get_opt(j, "dt", c.dt);
    get_opt(j, "t_h", c.t_h);
    if (auto it = j.find("initial_state"); it != j.end()) {
        auto& s = c.initial_state;
        get_opt(*it, "t", s.t);
        get_opt(*it, "d_E", s.d_E);
        get_opt(*it, "v_E", s.v_E);
        get_opt(*it, "l_E", s.l_E);
        get_opt(*it, "d_S", s.d_S);
        get_opt(*it, "v_S", s.v_S);
        get_opt(*it, "l_S", s.l_S);
        get_opt(*it, "exited_S", s.exited_S);
    }
    if (auto it = j.find("randomize"); it != j.end()) {
        auto& r = c.randomize;
        get_opt(*it, "enabled", r.enabled);
        range_from(*it, "d_S0", r.d_S0);
        range_from(*it, "gap0", r.gap0);
        range_from(*it, "v_E0", r.v_E0);
        range_from(*it, "v_S0", r.v_S0);
    }
    get_opt(j, "route_probs", c.route_probs);
    if (auto it = j.find("driver"); it != j.end()) {
        auto& d = c.driver;
        get_opt(*it, "v_d", d.v_d);
        get_opt(*it, "v_d_lo", d.v_d_lo);
        get_opt(*it, "v_d_hi", d.v_d_hi);
        get_opt(*it, "v_d_sigma", d.v_d_sigma);
        get_opt(*it, "k_v", d.k_v);
        get_opt(*it, "a_bound_S", d.a_bound_S);
        get_opt(*it, "q_a", d.q_a);
        get_opt(*it, "q_a_lo", d.q_a_lo);
        get_opt(*it, "q_a_hi", d.q_a_hi);
        get_opt(*it, "d_a", d.d_a);
        get_opt(*it, "d_c", d.d_c);
        get_opt(*it, "d_n_bound", d.d_n_bound);
        get_opt(*it, "tau_lc", d.tau_lc);
        get_opt(*it, "d_lc0", d.d_lc0);
    }
    get_opt(j, "N_s", c.N_s);
    get_opt(j, "seed", c.seed);
    get_opt(j, "gap_weight", c.gap_weight);
    get_opt(j, "gap_cap", c.gap_cap);
    if (auto it = j.find("planner"); it != j.end()) {
        get_opt(*it, "brake_fallback", c.planner.brake_fallback);
        if (auto tb = it->find("tie_break"); tb != it->end()) c.planner.tie_break = tie_break_from(tb->get<std::string>());
    }
    if (auto it = j.find("idm"); it != j.end()) {
        auto& idm = c.idm;
        get_opt(*it, "v0", idm.v0);
        get_opt(*it, "T", idm.T);
        get_opt(*it, "s0", idm.s0);
        get_opt(*it, "a", idm.a);
        get_opt(*it, "b", idm.b);
        get_opt(*it, "delta", idm.delta);
        get_opt(*it, "hard_brake", idm.hard_brake);
    }
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_config(const ScenarioConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << to_json(config) << '\n';
}

} // namespace spap
