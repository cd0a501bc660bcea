#include "spap/prediction.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

namespace spap {

BoundedDist BoundedDist::uniform(double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("uniform support needs lo <= hi");
    return {Kind::Uniform, lo, hi, 0.5 * (lo + hi), 1.0};
}

BoundedDist BoundedDist::truncated_normal(double mu, double sigma, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("truncated normal support needs lo <= hi");
    if (!(sigma > 0.0)) throw std::invalid_argument("truncated normal needs sigma > 0");
    return {Kind::TruncatedNormal, lo, hi, mu, sigma};
}

double BoundedDist::cdf(double x) const {
    if (kind_ == Kind::Uniform) return x;
    return 0.5 * std::erfc(-(x - mu_) / (sigma_ * std::sqrt(2.0)));
}

double BoundedDist::density(double x) const {
    if (!contains(x)) return 0.0;
    if (is_point()) return 1.0;
    if (kind_ == Kind::Uniform) return 1.0;
    const double z = (x - mu_) / sigma_;
    return std::exp(-0.5 * z * z);
}

double BoundedDist::mass(double a, double b) const {
    a = std::max(a, lo_);
    b = std::min(b, hi_);
    if (a > b) return 0.0;
    if (is_point()) return 1.0;
    return cdf(b) - cdf(a);
}

double BoundedDist::sample(Rng& rng) const {
    const double u = uniform01(rng);
    if (is_point()) return lo_;
    if (kind_ == Kind::Uniform) return lo_ + (hi_ - lo_) * u;
    const double p = cdf(lo_) + u * (cdf(hi_) - cdf(lo_));
    const boost::math::normal_distribution<double> parent(mu_, sigma_);
    const double x = boost::math::quantile(parent, std::clamp(p, 1e-300, 1.0 - 1e-16));
    return std::clamp(x, lo_, hi_);
}

std::optional<BoundedDist> BoundedDist::truncated(double a, double b) const {
    const double nlo = std::max(a, lo_);
    const double nhi = std::min(b, hi_);
    if (nlo > nhi) return std::nullopt;
    BoundedDist out = *this;
    out.lo_ = nlo;
    out.hi_ = nhi;
    if (kind_ == Kind::Uniform) out.mu_ = 0.5 * (nlo + nhi); // uniform shape follows its support
    return out;
}

double ParamDistribution::density(const TrajectoryParams& w) const {
    double f = d_lc1.density(w.d_lc1) * v_d.density(w.v_d);
    if (w.route != RouteId::Route1) {
        f *= d_lc2.density(w.d_lc2);
        if (!(w.d_lc1 < w.d_lc2)) f = 0.0;
    }
    return f;
}

bool ParamDistribution::contains(const ParamDistribution& o) const {
    auto in = [](const BoundedDist& outer, const BoundedDist& inner) {
        return outer.lo() <= inner.lo() && inner.hi() <= outer.hi();
    };
    return in(d_lc1, o.d_lc1) && in(d_lc2, o.d_lc2) && in(v_d, o.v_d);
}

double ParamDistribution::support_mass() const {
    return d_lc1.support_mass() * d_lc2.support_mass() * v_d.support_mass();
}

const PredictionEntry* Prediction::find(RouteId r) const {
    for (const auto& e : entries)
        if (e.route == r) return &e;
    return nullptr;
}

double Prediction::total_prob() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.prob;
    return s;
}

Prediction make_prediction(const ScenarioConfig& config) {
    const auto& m = config.driver;
    const double g_lo = m.gap_min();
    const double g_hi = m.gap_max();
    const auto v_d = BoundedDist::truncated_normal(m.v_d, m.v_d_sigma, m.v_d_lo, m.v_d_hi);
    const auto d_lc1 = BoundedDist::uniform(m.d_lc0 + g_lo, m.d_lc0 + g_hi);
    const Range w = exit_change_window(config.geometry);

    Prediction pred;
    for (auto r : kAllRoutes) {
        PredictionEntry e;
        e.route = r;
        e.prob = config.route_probs[static_cast<std::size_t>(route_index(r))];
        e.dist.d_lc1 = d_lc1;
        e.dist.v_d = v_d;
        double lo2 = m.d_lc0 + 2.0 * g_lo;
        double hi2 = m.d_lc0 + 2.0 * g_hi;
        if (r == RouteId::Route3) {
            lo2 = std::clamp(lo2, w.lo, w.hi);
            hi2 = std::clamp(hi2, w.lo, w.hi);
        }
        // Route1 never uses d_lc2; keep a point so its mass factor is 1.
        e.dist.d_lc2 = r == RouteId::Route1 ? BoundedDist::uniform(hi2, hi2) : BoundedDist::uniform(lo2, hi2);
        pred.entries.push_back(e);
    }
    return pred;
}

namespace {

enum class Observed { Lane1, Change12, Lane2, Change23, Lane3, Exited, Other };

Observed classify(LaneSet occ) {
    const int s = kStartLane;
    if (occ.empty()) return Observed::Exited;
    if (occ == LaneSet::of(s)) return Observed::Lane1;
    if (occ == (LaneSet::of(s) | LaneSet::of(s + 1))) return Observed::Change12;
    if (occ == LaneSet::of(s + 1)) return Observed::Lane2;
    if (occ == (LaneSet::of(s + 1) | LaneSet::of(s + 2))) return Observed::Change23;
    if (occ == LaneSet::of(s + 2)) return Observed::Lane3;
    return Observed::Other;
}

// Truncation implied by the observation, assuming the route is feasible.
ParamDistribution truncate_to(const ParamDistribution& dist, RouteId route, Observed obs, double d_S) {
    ParamDistribution out = dist;
    const bool two_changes = route != RouteId::Route1;
    auto lower = [&](BoundedDist& b) { b = b.truncated(d_S, b.hi()).value_or(b); };
    auto upper = [&](BoundedDist& b) { b = b.truncated(b.lo(), d_S).value_or(b); };
    switch (obs) {
    case Observed::Lane1:
        lower(out.d_lc1);
        if (two_changes) lower(out.d_lc2);
        break;
    case Observed::Change12:
        upper(out.d_lc1);
        break;
    case Observed::Lane2:
        upper(out.d_lc1);
        if (two_changes) lower(out.d_lc2);
        break;
    case Observed::Change23:
    case Observed::Lane3:
    case Observed::Exited:
        upper(out.d_lc1);
        if (two_changes) upper(out.d_lc2);
        break;
    case Observed::Other:
        break;
    }
    return out;
}

} // namespace

bool is_feasible(RouteId route, double d_S, LaneSet occupancy, const RoadGeometry& geometry,
                 const ParamDistribution& dist) {
    const Observed obs = classify(occupancy);
    const bool two_changes = route != RouteId::Route1;
    switch (obs) {
    case Observed::Lane1:
        return dist.d_lc1.hi() > d_S && (!two_changes || dist.d_lc2.hi() > d_S);
    case Observed::Change12:
        return dist.d_lc1.lo() <= d_S;
    case Observed::Lane2:
        return dist.d_lc1.lo() <= d_S && (!two_changes || dist.d_lc2.hi() > d_S);
    case Observed::Change23:
        return two_changes && dist.d_lc1.lo() <= d_S && dist.d_lc2.lo() <= d_S;
    case Observed::Lane3:
        if (!two_changes || dist.d_lc2.lo() > d_S) return false;
        return route == RouteId::Route2 || d_S <= geometry.offramp_end;
    case Observed::Exited:
        return route == RouteId::Route3 && dist.d_lc2.lo() <= d_S;
    case Observed::Other:
        return false;
    }
    return false;
}

Prediction adapt(const Prediction& pred, const SystemState& state, const RoadGeometry& geometry) {
    const LaneSet occ = surrounding_occupancy(state);
    const Observed obs = classify(occ);
    Prediction out;
    double total = 0.0;
    bool any_feasible = false;
    for (const auto& e : pred.entries) {
        if (!is_feasible(e.route, state.d_S, occ, geometry, e.dist)) continue;
        any_feasible = true;
        PredictionEntry n = e;
        n.dist = truncate_to(e.dist, e.route, obs, state.d_S);
        const double before = e.dist.support_mass();
        const double frac = before > 0.0 ? n.dist.support_mass() / before : 0.0;
        n.prob = e.prob * frac;
        total += n.prob;
        out.entries.push_back(n);
    }
    if (!any_feasible)
        throw ConservativenessViolation("no predicted route is consistent with the observed surrounding state");
    if (total <= 0.0) {
        if (pred.total_prob() > 0.0)
            throw ConservativenessViolation("all feasible routes have zero probability");
        return out;
    }
    for (auto& e : out.entries) e.prob /= total;
    return out;
}

TrajectoryParams sample_params(const ParamDistribution& dist, RouteId route, Rng& rng) {
    for (int i = 0; i < kSampleRetryCap; ++i) {
        TrajectoryParams w;
        w.route = route;
        w.d_lc1 = dist.d_lc1.sample(rng);
        w.d_lc2 = dist.d_lc2.sample(rng);
        w.v_d = dist.v_d.sample(rng);
        if (route == RouteId::Route1 || w.d_lc1 < w.d_lc2) return w;
    }
    throw std::runtime_error("sample_params: retry cap exceeded; truncated support admits no ordered sample");
}

TrajectoryParams nominal_params(const ParamDistribution& dist, RouteId route) {
    TrajectoryParams w;
    w.route = route;
    w.d_lc1 = dist.d_lc1.mid();
    w.d_lc2 = dist.d_lc2.mid();
    w.v_d = dist.v_d.kind() == BoundedDist::Kind::TruncatedNormal
                ? std::clamp(dist.v_d.mu(), dist.v_d.lo(), dist.v_d.hi())
                : dist.v_d.mid();
    if (route != RouteId::Route1 && !(w.d_lc1 < w.d_lc2)) {
        // Overlapping truncated supports: take the earliest first change and a
        // second change strictly beyond it.
        w.d_lc1 = dist.d_lc1.lo();
        w.d_lc2 = std::max(dist.d_lc2.mid(), std::nextafter(w.d_lc1, 1e300));
    }
    return w;
}

Prediction condition_on_aggressiveness(const Prediction& pred, double q_a_est, const SurroundingDriverModel& model,
                                       const RoadGeometry& geometry) {
    if (q_a_est < -1.0 || q_a_est > 1.0) throw std::invalid_argument("q_a_est must be in [-1, 1]");
    const double g = model.d_a * q_a_est + model.d_c;
    const double n = model.d_n_bound;
    const Range w = exit_change_window(geometry);
    Prediction out = pred;
    for (auto& e : out.entries) {
        const double lo1 = model.d_lc0 + g - n;
        const double hi1 = model.d_lc0 + g + n;
        auto c1 = e.dist.d_lc1.truncated(lo1, hi1);
        if (!c1) throw std::invalid_argument("aggressiveness estimate inconsistent with " + route_name(e.route));
        e.dist.d_lc1 = *c1;
        if (e.route == RouteId::Route1) continue;
        double lo2 = model.d_lc0 + 2.0 * (g - n);
        double hi2 = model.d_lc0 + 2.0 * (g + n);
        if (e.route == RouteId::Route3) {
            lo2 = std::clamp(lo2, w.lo, w.hi);
            hi2 = std::clamp(hi2, w.lo, w.hi);
        }
        auto c2 = e.dist.d_lc2.truncated(lo2, hi2);
        if (!c2) throw std::invalid_argument("aggressiveness estimate inconsistent with " + route_name(e.route));
        e.dist.d_lc2 = *c2;
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json dist_json(const BoundedDist& d) {
    if (d.kind() == BoundedDist::Kind::Uniform) return {{"kind", "uniform"}, {"lo", d.lo()}, {"hi", d.hi()}};
    return {{"kind", "truncated_normal"}, {"mu", d.mu()}, {"sigma", d.sigma()}, {"lo", d.lo()}, {"hi", d.hi()}};
}

BoundedDist dist_from(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "uniform") return BoundedDist::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (kind == "truncated_normal")
        return BoundedDist::truncated_normal(j.at("mu").get<double>(), j.at("sigma").get<double>(),
                                             j.at("lo").get<double>(), j.at("hi").get<double>());
    throw std::invalid_argument("unknown distribution kind: " + kind);
}

} // namespace

std::string to_json(const Prediction& pred, int indent) {
    json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["entries"] = json::array();
    for (const auto& e : pred.entries) {
        j["entries"].push_back({{"route", route_name(e.route)},
                                {"prob", e.prob},
                                {"d_lc1", dist_json(e.dist.d_lc1)},
                                {"d_lc2", dist_json(e.dist.d_lc2)},
                                {"v_d", dist_json(e.dist.v_d)}});
    }
    return j.dump(indent);
}

Prediction prediction_from_json(const std::string& text) {
    const json j = json::parse(text);
    Prediction pred;
    for (const auto& je : j.at("entries")) {
        PredictionEntry e;
        e.route = route_from_name(je.at("route").get<std::string>());
        e.prob = je.at("prob").get<double>();
        e.dist.d_lc1 = dist_from(je.at("d_lc1"));
        e.dist.d_lc2 = dist_from(je.at("d_lc2"));
        e.dist.v_d = dist_from(je.at("v_d"));
        pred.entries.push_back(e);
    }
    return pred;
}

} // namespace spap
