#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spap {

inline constexpr int kScenarioSchemaVersion = 1;

/// Lane ids run 0..lane_count-1 from leftmost to rightmost; the highest id is
/// the off-ramp lane.
struct RoadGeometry {
    int lane_count = 4;
    int offramp_lane = 3;
    double offramp_start = 400.0;
    double offramp_end = 500.0;
    double highway_length = 1000.0;
    /// Route-3 exit changes must start at least this far before offramp_end.
    double offramp_margin = 10.0;

    std::vector<int> lane_ids() const;

    bool operator==(const RoadGeometry&) const = default;
};

/// Bitset over lane ids. Lane changes occupy both source and target lanes.
class LaneSet {
public:
    constexpr LaneSet() = default;
    static constexpr LaneSet of(int lane) { return LaneSet{static_cast<std::uint8_t>(1u << lane)}; }

    constexpr bool contains(int lane) const { return lane >= 0 && lane < 8 && (bits_ >> lane) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr LaneSet operator|(LaneSet o) const { return LaneSet{static_cast<std::uint8_t>(bits_ | o.bits_)}; }
    constexpr LaneSet& operator|=(LaneSet o) { bits_ |= o.bits_; return *this; }
    constexpr bool operator==(const LaneSet&) const = default;
    constexpr std::uint8_t bits() const { return bits_; }

    std::vector<int> lanes() const;
    std::string to_string() const;

private:
    constexpr explicit LaneSet(std::uint8_t b) : bits_(b) {}
    std::uint8_t bits_ = 0;
};

/// Joint kinematic state of the ego vehicle and the one surrounding vehicle.
///
/// l_S is fractional while a lane change is in progress: the integer part is
/// the source lane and the fractional part encodes elapsed change steps as
/// (elapsed + 0.5) / change_steps, so it is never integral mid-change. Once the
/// surrounding vehicle has left through the off-ramp, exited_S is set and it
/// occupies no lane.
struct SystemState {
    double t = 0.0;
    double d_E = 0.0;
    double v_E = 25.0;
    int l_E = 3;
    double d_S = 20.0;
    double v_S = 25.0;
    double l_S = 1.0;
    bool exited_S = false;

    bool operator==(const SystemState&) const = default;
};

/// Occupied lanes of the surrounding vehicle as observed in a state.
LaneSet surrounding_occupancy(const SystemState& s);

enum class RouteId : int { Route1 = 0, Route2 = 1, Route3 = 2 };
inline constexpr std::array<RouteId, 3> kAllRoutes{RouteId::Route1, RouteId::Route2, RouteId::Route3};
inline constexpr int route_index(RouteId r) { return static_cast<int>(r); }
std::string route_name(RouteId r);
RouteId route_from_name(const std::string& name);

struct SafetyParams {
    double d_m = 5.0;
    double dd_s = 10.0;
    double a_min = -6.0;
    double a_max = 3.0;
    double da = 0.5;
    double v_limit = 30.0;

    /// Acceleration grid a_min, a_min + da, ... up to a_max (inclusive within 1e-9).
    std::vector<double> accel_grid() const;

    bool operator==(const SafetyParams&) const = default;
};

/// Behaviour model of the surrounding vehicle.
///
/// Longitudinal: proportional tracking of a desired speed, clamped to
/// +-a_bound_S. Lateral: the turn signal comes on at d_lc0 and each lane change
/// executes after a gap d_a * q_a + d_c + noise, noise uniform on
/// [-d_n_bound, d_n_bound].
struct SurroundingDriverModel {
    double v_d = 25.0;
    double v_d_lo = 24.0;
    double v_d_hi = 26.0;
    double v_d_sigma = 0.5;
    double k_v = 0.5;
    double a_bound_S = 2.0;
    double q_a = 0.0;
    double q_a_lo = -1.0;
    double q_a_hi = 1.0;
    double d_a = -20.0;
    double d_c = 60.0;
    double d_n_bound = 5.0;
    double tau_lc = 2.0;
    double d_lc0 = 300.0;

    double gap_min() const { return d_a * 1.0 + d_c - d_n_bound; }
    double gap_max() const { return d_a * -1.0 + d_c + d_n_bound; }

    bool operator==(const SurroundingDriverModel&) const = default;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Range&) const = default;
};

/// Per-episode randomisation of the initial state. Disabled means the
/// configured initial_state is used verbatim.
struct InitialStateSampler {
    bool enabled = true;
    Range d_S0{190.0, 210.0};
    /// d_S0 - d_E0; positive means the surrounding vehicle starts ahead.
    Range gap0{0.0, 40.0};
    Range v_E0{23.0, 27.0};
    Range v_S0{24.0, 26.0};

    bool operator==(const InitialStateSampler&) const = default;
};

enum class TieBreak { SmallerMagnitude, LaterWins };

struct PlannerOptions {
    /// Apply a_min instead of leaving u at 0 when no grid action is safe.
    bool brake_fallback = false;
    TieBreak tie_break = TieBreak::SmallerMagnitude;

    bool operator==(const PlannerOptions&) const = default;
};

struct IdmParams {
    double v0 = 25.0;
    double T = 1.5;
    double s0 = 2.0;
    double a = 1.5;
    double b = 2.0;
    double delta = 4.0;
    double hard_brake = 6.0;

    bool operator==(const IdmParams&) const = default;
};

struct ScenarioConfig {
    int schema_version = kScenarioSchemaVersion;
    RoadGeometry geometry;
    SafetyParams safety;
    double horizon = 12.0;
    double dt = 0.1;
    double t_h = 4.0;
    SystemState initial_state;
    InitialStateSampler randomize;
    std::array<double, 3> route_probs{0.4, 0.4, 0.2};
    SurroundingDriverModel driver;
    int N_s = 50;
    std::uint64_t seed = 0;
    double gap_weight = 0.5;
    double gap_cap = 30.0;
    PlannerOptions planner;
    IdmParams idm;

    int episode_steps() const;
    int lookahead_steps() const;
    int change_steps() const;

    bool operator==(const ScenarioConfig&) const = default;
};

/// Raised by validate(); what() lists every violated invariant, one per line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Every violated invariant, empty when the config is valid.
std::vector<std::string> check(const ScenarioConfig& config);

/// Returns the config unchanged when valid, throws ConfigError otherwise.
const ScenarioConfig& validate(const ScenarioConfig& config);

/// True when `step` divides `span` to within 1e-9 relative.
bool divides(double step, double span);

// Structured text (JSON) round trip. Missing fields keep their defaults.
std::string to_json(const ScenarioConfig& config, int indent = 2);
ScenarioConfig config_from_json(const std::string& text);
ScenarioConfig load_config(const std::string& path);
void save_config(const ScenarioConfig& config, const std::string& path);

} // namespace spap
