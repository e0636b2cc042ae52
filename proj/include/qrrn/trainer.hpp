#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qrrn/env.hpp"
#include "qrrn/learner.hpp"
#include "qrrn/policies.hpp"
#include "qrrn/rng.hpp"
#include "qrrn/roadnet.hpp"

namespace qrrn {

/// Either a map file or generator parameters.
struct MapSource {
    std::string file;  // resolved path; empty when generated
    ScenarioKind kind = ScenarioKind::two_route;
    ScenarioParams params;

    bool generated() const noexcept { return file.empty(); }
};

struct RunConfig {
    MapSource map;
    EnvConfig env;
    AgentConfig agent;
    std::int64_t total_steps = 100'000;
    std::int64_t eval_interval = 10'000;
    int eval_episode_cap = 1000;
    std::vector<ExecPolicy> exec_policies;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "out";
    std::vector<double> lr_sweep;  // empty = single run at agent.lr

    /// Throws ConfigError.
    void validate() const;
};

/// Parses a run config document. Relative map paths resolve against
/// `base_dir`. Absent optional fields take their defaults; unknown keys are
/// rejected. Throws ConfigError.
RunConfig parse_run_config(std::string_view text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
std::string emit_run_config(const RunConfig& cfg);

GraphMap resolve_map(const MapSource& src);

struct EpisodeTrace {
    std::vector<NodeId> visited;  // starts with the start state
    std::vector<ActionIndex> actions;
    std::vector<double> rewards;
    double discounted_return = 0.0;
    bool reached_goal = false;

    friend bool operator==(const EpisodeTrace&, const EpisodeTrace&) = default;
};

double discounted_sum(const std::vector<double>& rewards, double gamma);

/// Deterministic rollout of an execution policy from map.start() until a goal
/// or `episode_cap` steps. Crosswalk draws come from `seed`.
EpisodeTrace evaluate(const Agent& agent, const ExecPolicy& exec, const GraphMap& map,
                      const EnvConfig& env_cfg, int episode_cap, double gamma, std::uint64_t seed);

enum class RouteClass { noisy, robust1, robust2, other, timeout };
std::string_view to_string(RouteClass c);
RouteClass parse_route_class(std::string_view s);

/// Start-to-goal simple routes of a map split into crosswalk and
/// crosswalk-free sets, each sorted by (length, node sequence).
struct RouteInventory {
    std::vector<Route> all;
    std::vector<Route> crosswalk_free;
};
RouteInventory route_inventory(const GraphMap& map);

RouteClass classify_route(const GraphMap& map, const RouteInventory& inv, const EpisodeTrace& trace);

struct EvalRecord {
    std::int64_t step = 0;
    std::size_t policy = 0;  // index into RunConfig::exec_policies
    EpisodeTrace trace;
    RouteClass route_class = RouteClass::timeout;

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// One seed's training run. Holds everything needed to resume bit-exactly.
class Trial {
public:
    Trial(RunConfig cfg, std::shared_ptr<const GraphMap> map, std::uint64_t seed);

    /// Advances training until `step` env steps have been taken (capped at
    /// total_steps), evaluating every eval_interval steps.
    void run_until(std::int64_t step);
    void run() { run_until(cfg_.total_steps); }

    bool finished() const noexcept { return step_ >= cfg_.total_steps; }
    std::int64_t step() const noexcept { return step_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const RunConfig& config() const noexcept { return cfg_; }
    const GraphMap& map() const noexcept { return *map_; }
    const Agent& agent() const noexcept { return agent_; }
    Agent& agent() noexcept { return agent_; }
    const std::vector<EvalRecord>& records() const noexcept { return records_; }

    /// Checkpoint file: magic "QRRN", u16 format version, u32 header length,
    /// JSON header, then little-endian f64 blocks in header order.
    void save(const std::string& path) const;
    /// Throws IoError, VersionMismatch, CorruptCheckpoint.
    static Trial load(const std::string& path);

private:
    Trial(RunConfig cfg, std::shared_ptr<const GraphMap> map, std::uint64_t seed, bool fresh);
    void start_episode();
    void evaluate_all();

    RunConfig cfg_;
    std::shared_ptr<const GraphMap> map_;
    RouteInventory inventory_;
    std::uint64_t seed_;
    Agent agent_;
    EnvState env_;
    Rng behavior_rng_;
    std::int64_t step_ = 0;
    std::int64_t episode_index_ = 0;
    std::vector<EvalRecord> records_;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct AggregatePoint {
    std::size_t policy = 0;
    std::int64_t step = 0;
    double mean_return = 0.0;
    double stderr_return = 0.0;
    int n_seeds = 0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<EvalRecord> records;
    std::vector<RouteClass> final_class;  // per exec policy
    std::vector<EpisodeTrace> final_trace;
};

struct TrialReport {
    RunConfig config;
    std::vector<SeedResult> seeds;  // config seed order
    std::vector<AggregatePoint> aggregate;
    std::vector<std::vector<int>> histogram;  // [policy][RouteClass]
};

struct TrialOptions {
    int jobs = 1;
    std::string checkpoint_dir;  // empty = no checkpoints
};

SeedResult summarize_trial(const Trial& trial);

/// Trains every seed (up to `jobs` in parallel) and aggregates mean and
/// standard error per eval point.
TrialReport run_trials(const RunConfig& cfg, const TrialOptions& opts = {});

TrialReport aggregate(const RunConfig& cfg, std::vector<SeedResult> seeds);

std::string curves_csv(const TrialReport& report);
std::string aggregate_csv(const TrialReport& report);
/// Mean +/- standard-error bands per execution policy.
std::string aggregate_svg(const TrialReport& report);
std::string summary_table(const TrialReport& report);
/// Final routes of every seed for one policy, labelled by class and count.
std::string final_routes_dot(const TrialReport& report, const GraphMap& map, std::size_t policy);

/// Mean over eval points of the seed-mean return, per policy.
std::vector<double> area_under_curve(const TrialReport& report);

/// Writes curves.csv, aggregate.csv, aggregate.svg and routes-<policy>.dot.
void write_report(const TrialReport& report, const GraphMap& map, const std::string& dir);

}  // namespace qrrn
