#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "spap/baselines.hpp"
#include "spap/planner.hpp"
#include "spap/prediction.hpp"
#include "spap/scenario.hpp"

namespace spap {

inline constexpr int kResultSchemaVersion = 1;

struct EpisodeOptions {
    bool keep_trace = false;
    /// Draw lane-change noise from a band `misspecified_noise_scale` times wider
    /// than the prediction assumes, breaking conservativeness on purpose.
    bool misspecified = false;
    double misspecified_noise_scale = 3.0;
};

/// Ground-truth route and trajectory parameters of one episode.
struct GroundTruth {
    RouteId route = RouteId::Route1;
    double q_a = 0.0;
    double noise1 = 0.0;
    double noise2 = 0.0;
    TrajectoryParams params;
    SystemState initial;
};

/// Draws the ground truth for a seed. Independent streams per quantity, so the
/// route draw is coupled across route_probs and nothing else depends on it.
GroundTruth draw_ground_truth(const ScenarioConfig& cfg, std::uint64_t seed, bool misspecified = false,
                              double noise_scale = 3.0);

struct TraceStep {
    int step = 0;
    SystemState state;
    double u = 0.0;
    double plan_time_s = 0.0;
    bool leader = false;
    bool has_plan = false;
    PlanResult plan;
    std::vector<PredictionEntry> prediction;
};

struct EpisodeResult {
    std::string planner;
    std::uint64_t seed = 0;
    GroundTruth truth;
    bool collided = false;
    int first_collision_step = -1;
    double min_realized_gap = kNoConflictGap;
    double avg_speed = 0.0;
    double final_speed = 0.0;
    int leader_steps = 0;
    int steps = 0;
    std::vector<double> plan_times_s;
    std::vector<SystemState> states; // steps + 1 entries
    std::vector<TraceStep> trace;    // only with keep_trace
};

/// True when the surrounding vehicle shares the ego lane closer than d_m.
bool in_collision(const SystemState& s, double d_m);

EpisodeResult run_episode(const ScenarioConfig& cfg, const std::string& planner, std::uint64_t seed,
                          const EpisodeOptions& opts = {});

struct Metrics {
    std::string planner;
    int n = 0;
    int collisions = 0;
    double safety_rate = 0.0;
    double avg_speed = 0.0;
    double final_speed = 0.0;
    double leader_rate = 0.0;
    double mean_plan_time_s = 0.0;
    double p95_plan_time_s = 0.0;
};

Metrics aggregate(const std::string& planner, const std::vector<EpisodeResult>& episodes);

struct BatchOptions {
    int jobs = 1;
    EpisodeOptions episode;
    /// Called after each finished episode with (finished, total); serialized.
    std::function<void(int, int)> progress;
    /// Called with each finished episode, in completion order; serialized.
    std::function<void(const EpisodeResult&)> on_episode;
};

/// Episodes on seeds base_seed .. base_seed + n - 1, in seed order regardless
/// of the number of worker threads.
std::vector<EpisodeResult> run_episodes(const ScenarioConfig& cfg, const std::string& planner, int n,
                                        std::uint64_t base_seed, const BatchOptions& opts = {});

Metrics run_batch(const ScenarioConfig& cfg, const std::string& planner, int n, std::uint64_t base_seed,
                  const BatchOptions& opts = {});

struct SweepP1Row {
    double p1 = 0.0;
    Metrics metrics;
};

/// For each p1 sets route_probs to (p1, 0.8 - p1, 0.2) and runs every planner
/// on the same seeds. Throws std::invalid_argument when p1 is outside [0, 0.8].
std::vector<SweepP1Row> sweep_p1(const ScenarioConfig& cfg, const std::vector<std::string>& planners,
                                 const std::vector<double>& grid, int n, std::uint64_t base_seed,
                                 const BatchOptions& opts = {});

struct SweepNsRow {
    int N_s = 0;
    Metrics metrics;
};

/// SPAP batches at each N_s with route_probs fixed to (0.4, 0.4, 0.2).
std::vector<SweepNsRow> sweep_ns(const ScenarioConfig& cfg, const std::vector<int>& grid, int n,
                                 std::uint64_t base_seed, const BatchOptions& opts = {});

/// Inclusive arithmetic grid "lo:hi:step", e.g. 0:0.8:0.1 gives 9 points.
std::vector<double> parse_grid(const std::string& spec);

// CSV writers. Wall-clock columns are appended only when `timing` is set, so
// the default output is reproducible byte for byte.
void write_metrics_csv(std::ostream& os, const std::vector<Metrics>& rows, bool timing);
void write_sweep_p1_csv(std::ostream& os, const std::vector<SweepP1Row>& rows, bool timing);
void write_sweep_ns_csv(std::ostream& os, const std::vector<SweepNsRow>& rows, bool timing);
/// Per-route occupancy intervals for the current state.
void write_tubes_csv(std::ostream& os, const SystemState& state, const Prediction& pred, const ScenarioConfig& cfg);

std::string episode_to_json(const EpisodeResult& ep, int indent = 1);

} // namespace spap
