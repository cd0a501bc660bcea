#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spap/rng.hpp"
#include "spap/scenario.hpp"
#include "spap/vehicle_dynamics.hpp"

namespace spap {

/// One bounded scalar distribution: uniform or normal truncated to [lo, hi].
/// lo == hi is a point mass. Truncating keeps the parent shape (mu, sigma) and
/// only narrows the support.
class BoundedDist {
public:
    enum class Kind { Uniform, TruncatedNormal };

    static BoundedDist uniform(double lo, double hi);
    static BoundedDist truncated_normal(double mu, double sigma, double lo, double hi);

    Kind kind() const { return kind_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double mu() const { return mu_; }
    double sigma() const { return sigma_; }
    double mid() const { return 0.5 * (lo_ + hi_); }
    bool is_point() const { return lo_ == hi_; }

    bool contains(double x) const { return x >= lo_ && x <= hi_; }
    /// Unnormalised parent density, zero outside the support.
    double density(double x) const;
    /// Parent-distribution mass of [a, b]; point masses count 1 when inside.
    double mass(double a, double b) const;
    double support_mass() const { return mass(lo_, hi_); }
    double sample(Rng& rng) const;

    /// Support intersected with [a, b]; nullopt when empty.
    std::optional<BoundedDist> truncated(double a, double b) const;

    bool operator==(const BoundedDist&) const = default;

private:
    BoundedDist(Kind k, double lo, double hi, double mu, double sigma)
        : kind_(k), lo_(lo), hi_(hi), mu_(mu), sigma_(sigma) {}
    double cdf(double x) const;

    Kind kind_ = Kind::Uniform;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double mu_ = 0.0;
    double sigma_ = 1.0;
};

/// Independent bounded distributions of the trajectory parameters of a route.
struct ParamDistribution {
    BoundedDist d_lc1 = BoundedDist::uniform(0.0, 0.0);
    BoundedDist d_lc2 = BoundedDist::uniform(0.0, 0.0);
    BoundedDist v_d = BoundedDist::uniform(0.0, 0.0);

    /// f(w) > 0 iff w lies in the support box (and d_lc1 < d_lc2 for routes
    /// with a second change).
    double density(const TrajectoryParams& w) const;
    /// Support box of `other` lies inside this one.
    bool contains(const ParamDistribution& other) const;
    double support_mass() const;

    bool operator==(const ParamDistribution&) const = default;
};

struct PredictionEntry {
    RouteId route = RouteId::Route1;
    double prob = 0.0;
    ParamDistribution dist;

    bool operator==(const PredictionEntry&) const = default;
};

struct Prediction {
    std::vector<PredictionEntry> entries;

    const PredictionEntry* find(RouteId r) const;
    double total_prob() const;

    bool operator==(const Prediction&) const = default;
};

/// Raised when no route is consistent with an observation, which can only
/// happen when the prediction was not conservative.
class ConservativenessViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Prior route distributions whose supports contain every parameter value the
/// driver model can generate.
Prediction make_prediction(const ScenarioConfig& config);

bool is_feasible(RouteId route, double d_S, LaneSet occupancy, const RoadGeometry& geometry,
                 const ParamDistribution& dist);

/// Drops routes inconsistent with the observed state, truncates surviving
/// supports and reweights by prior probability times surviving support mass.
/// Throws ConservativenessViolation when nothing survives.
Prediction adapt(const Prediction& pred, const SystemState& state, const RoadGeometry& geometry);

inline constexpr int kSampleRetryCap = 1000;

/// Draws w from dist, resampling until d_lc1 < d_lc2 for two-change routes.
/// Throws std::runtime_error when the cap is hit.
TrajectoryParams sample_params(const ParamDistribution& dist, RouteId route, Rng& rng);

/// Mid-support parameter vector, used by certainty-equivalent planners.
TrajectoryParams nominal_params(const ParamDistribution& dist, RouteId route);

/// Intersects each lane-change support with the range implied by a known
/// aggressiveness level. Probabilities are unchanged. Throws std::invalid_argument
/// when an intersection is empty.
Prediction condition_on_aggressiveness(const Prediction& pred, double q_a_est, const SurroundingDriverModel& model,
                                       const RoadGeometry& geometry);

std::string to_json(const Prediction& pred, int indent = 2);
Prediction prediction_from_json(const std::string& text);

} // namespace spap
