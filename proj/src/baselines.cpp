#include "spap/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spap {

double idm_law(double v, std::optional<double> gap, double dv, const IdmParams& p) {
    double u = p.a * (1.0 - std::pow(v / p.v0, p.delta));
    if (gap) {
        const double s_star = p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a * p.b)));
        const double s = std::max(*gap, 1e-3);
        u -= p.a * (s_star / s) * (s_star / s);
    }
    return std::clamp(u, -p.hard_brake, p.a);
}

bool idm_has_leader(const SystemState& state, int variant, const ScenarioConfig& cfg) {
    if (variant < 1 || variant > 3) throw std::invalid_argument("IDM variant must be 1, 2 or 3");
    if (state.exited_S || state.d_S <= state.d_E) return false;
    const LaneSet occ = surrounding_occupancy(state);
    if (occ.contains(state.l_E)) return true;
    if (variant == 1) return false;
    if (variant == 3) return !occ.empty();
    const bool signal = state.d_S >= cfg.driver.d_lc0;
    const bool adjacent = occ.contains(state.l_E - 1) || occ.contains(state.l_E + 1);
    return signal && adjacent;
}

double idm_accel(const SystemState& state, int variant, const ScenarioConfig& cfg) {
    std::optional<double> gap;
    if (idm_has_leader(state, variant, cfg)) gap = state.d_S - state.d_E - cfg.safety.d_m;
    const double u = idm_law(state.v_E, gap, state.v_E - state.v_S, cfg.idm);
    return std::clamp(u, cfg.safety.a_min, cfg.safety.a_max);
}

PlanResult mpc_plan(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg) {
    const Prediction adapted = adapt(pred, state, cfg.geometry);
    const auto routes = build_route_tubes(state, adapted, cfg);
    std::vector<TrajectoryParams> nominal;
    for (const auto& rt : routes) nominal.push_back(nominal_params(rt.dist, rt.route));

    PlanResult res;
    res.u = cfg.safety.a_min;
    for (double a_t : cfg.safety.accel_grid()) {
        ActionEval ev;
        ev.a_t = a_t;
        const SafetyResult s = safety_eval(state, routes, a_t, cfg);
        ev.theta = s.theta;
        ev.dd = s.dd;
        ev.omega = ev.phi = std::numeric_limits<double>::quiet_NaN();
        if (s.theta == 0) {
            double worst = routes.empty() ? free_road_q(state, a_t, cfg) : std::numeric_limits<double>::infinity();
            for (const auto& w : nominal) worst = std::min(worst, inner_q(state, a_t, w, cfg));
            ev.omega = ev.phi = worst;
            const bool better = res.theta == 1 || worst > res.omega ||
                                (worst == res.omega && (std::abs(a_t) < std::abs(res.u) ||
                                                        (std::abs(a_t) == std::abs(res.u) && a_t < res.u)));
            if (better) {
                res.u = a_t;
                res.omega = worst;
                res.theta = 0;
                res.dd = s.dd;
            }
        }
        res.table.push_back(ev);
    }
    return res;
}

namespace {

class IdmPlanner final : public Planner {
public:
    explicit IdmPlanner(int variant) : variant_(variant) {}
    std::string name() const override { return "idm" + std::to_string(variant_); }
    bool uses_prediction() const override { return false; }
    PlannerStep act(const SystemState& state, const Prediction&, const ScenarioConfig& cfg,
                    const PlanKey&) const override {
        PlannerStep st;
        st.leader = idm_has_leader(state, variant_, cfg);
        st.u = idm_accel(state, variant_, cfg);
        return st;
    }

private:
    int variant_;
};

class SpapPlanner final : public Planner {
public:
    std::string name() const override { return "spap"; }
    PlannerStep act(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg,
                    const PlanKey& key) const override {
        PlannerStep st;
        st.plan = plan(state, pred, cfg, key);
        st.u = st.plan.u;
        st.has_plan = true;
        return st;
    }
};

class MpcPlanner final : public Planner {
public:
    std::string name() const override { return "mpc"; }
    PlannerStep act(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg,
                    const PlanKey&) const override {
        PlannerStep st;
        st.plan = mpc_plan(state, pred, cfg);
        st.u = st.plan.u;
        st.has_plan = true;
        return st;
    }
};

class AggPlanner final : public Planner {
public:
    AggPlanner(std::unique_ptr<Planner> inner, double q_a) : inner_(std::move(inner)), q_a_(q_a) {}
    std::string name() const override { return inner_->name() + "_agg"; }
    PlannerStep act(const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg,
                    const PlanKey& key) const override {
        return inner_->act(state, pred, cfg, key);
    }
    Prediction prepare(const Prediction& pred, const ScenarioConfig& cfg) const override {
        return condition_on_aggressiveness(inner_->prepare(pred, cfg), q_a_, cfg.driver, cfg.geometry);
    }

private:
    std::unique_ptr<Planner> inner_;
    double q_a_;
};

} // namespace

std::unique_ptr<Planner> with_aggressiveness(std::unique_ptr<Planner> inner, double q_a_est) {
    if (!inner->uses_prediction()) throw std::invalid_argument("with_aggressiveness needs a prediction-based planner");
    return std::make_unique<AggPlanner>(std::move(inner), q_a_est);
}

const std::vector<std::string>& planner_names() {
    static const std::vector<std::string> names{"idm1", "idm2", "idm3", "mpc", "mpc_agg", "spap", "spap_agg"};
    return names;
}

bool is_planner_name(const std::string& name) {
    const auto& n = planner_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

std::unique_ptr<Planner> make_planner(const std::string& name, double q_a_true) {
    if (name == "idm1") return std::make_unique<IdmPlanner>(1);
    if (name == "idm2") return std::make_unique<IdmPlanner>(2);
    if (name == "idm3") return std::make_unique<IdmPlanner>(3);
    if (name == "mpc") return std::make_unique<MpcPlanner>();
    if (name == "spap") return std::make_unique<SpapPlanner>();
    if (name == "mpc_agg") return with_aggressiveness(std::make_unique<MpcPlanner>(), q_a_true);
    if (name == "spap_agg") return with_aggressiveness(std::make_unique<SpapPlanner>(), q_a_true);
    std::string msg = "unknown planner '" + name + "'; valid planners:";
    for (const auto& n : planner_names()) msg += " " + n;
    throw std::invalid_argument(msg);
}

} // namespace spap
