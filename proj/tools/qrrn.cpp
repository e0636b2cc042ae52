// Command-line front end: map generation, training, evaluation, multi-seed
// trials, oracles and checkpoint inspection.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error, 3 IO error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qrrn/errors.hpp"
#include "qrrn/oracle.hpp"
#include "qrrn/policies.hpp"
#include "qrrn/trainer.hpp"

namespace fs = std::filesystem;
using namespace qrrn;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kIo = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_output(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutputError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw OutputError("failed writing '" + path.string() + "'");
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

std::string join_nodes(const std::vector<NodeId>& nodes) {
    std::string s;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += (i ? " " : "") + std::to_string(nodes[i]);
    return s;
}

// Inputs that fail to load are a usage/config problem for the caller.
GraphMap load_input_map(const std::string& path) {
    try {
        return load_map_file(path);
    } catch (const IoError& e) {
        throw UsageError(e.what());
    }
}

RunConfig load_input_config(const std::string& path) {
    RunConfig cfg;
    try {
        cfg = load_run_config(path);
    } catch (const IoError& e) {
        throw UsageError(e.what());
    }
    if (const char* off = std::getenv("QRRN_SEED_OFFSET")) {
        char* end = nullptr;
        const long long v = std::strtoll(off, &end, 10);
        if (end == off || *end != '\0') throw UsageError("QRRN_SEED_OFFSET must be an integer");
        for (auto& s : cfg.seeds) s += static_cast<std::uint64_t>(v);
    }
    return cfg;
}

GraphMap resolve_input_map(const MapSource& src) {
    try {
        return resolve_map(src);
    } catch (const IoError& e) {
        throw UsageError(e.what());
    }
}

Trial load_input_checkpoint(const std::string& path) {
    try {
        return Trial::load(path);
    } catch (const IoError& e) {
        throw UsageError(e.what());
    } catch (const VersionMismatch& e) {
        throw UsageError(e.what());
    } catch (const CorruptCheckpoint& e) {
        throw UsageError(e.what());
    }
}

ExecPolicy make_policy(const std::string& kind, std::optional<double> thres, double r_base, double tie_eps) {
    ExecPolicy p;
    try {
        p.kind = parse_exec_kind(kind);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    p.ssd_thres = thres.value_or(5.0 * r_base);
    p.tie_eps = tie_eps;
    return p;
}

// ---------------------------------------------------------------------------

struct GenMapArgs {
    std::string kind;
    int noisy_len = 8;
    int robust_len = 10;
    int robust2_len = 11;
    std::string out;
};

int cmd_gen_map(const GenMapArgs& args) {
    GraphMap map = [&] {
        try {
            ScenarioParams p{args.noisy_len, args.robust_len, args.robust2_len};
            return generate_scenario(parse_scenario_kind(args.kind), p);
        } catch (const BadParams& e) {
            throw UsageError(e.what());
        }
    }();
    write_output(args.out, emit_map(map));

    std::cout << "map " << map.name() << ": " << map.num_states() << " states, action_dim "
              << map.action_dim() << "\n";
    std::cout << "routes (start " << map.start() << " -> goal " << map.goals().front() << "):\n";
    for (const Route& r : enumerate_simple_paths(map, map.start(), map.num_states()))
        std::cout << "  len " << r.length() << (route_has_crosswalk(map, r) ? "  crosswalk  " : "  clear      ")
                  << join_nodes(r.nodes) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> stop_at;
    std::string resume;
    std::string checkpoint;
};

int cmd_train(const TrainArgs& args) {
    std::optional<Trial> trial;
    if (!args.resume.empty()) {
        trial.emplace(load_input_checkpoint(args.resume));
    } else {
        if (args.config.empty()) throw UsageError("train needs a config file or --resume");
        RunConfig cfg = load_input_config(args.config);
        const std::uint64_t seed = args.seed.value_or(cfg.seeds.front());
        cfg.seeds = {seed};
        auto map = std::make_shared<const GraphMap>(resolve_input_map(cfg.map));
        trial.emplace(cfg, map, seed);
    }
    trial->run_until(args.stop_at.value_or(trial->config().total_steps));

    const RunConfig& cfg = trial->config();
    const fs::path ckpt = args.checkpoint.empty()
                              ? fs::path(cfg.output_dir) / ("seed-" + std::to_string(trial->seed()) + ".qrrn")
                              : fs::path(args.checkpoint);
    std::error_code ec;
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path(), ec);
    try {
        trial->save(ckpt.string());
    } catch (const IoError& e) {
        throw OutputError(e.what());
    }

    const TrialReport report = aggregate(cfg, {summarize_trial(*trial)});
    write_output(fs::path(cfg.output_dir) / ("curves-seed-" + std::to_string(trial->seed()) + ".csv"),
                 curves_csv(report));
    std::cout << "trained seed " << trial->seed() << " to step " << trial->step() << "; checkpoint "
              << ckpt.string() << "\n";
    for (const EvalRecord& r : trial->records())
        if (r.step == trial->step())
            std::cout << "  " << cfg.exec_policies[r.policy].name() << ": return "
                      << num(r.trace.discounted_return) << ", route " << to_string(r.route_class) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string policy = "greedy";
    std::optional<double> ssd_thres;
    double tie_eps = 0.0;
    std::uint64_t seed = 0;
    std::string dot;
};

int cmd_eval(const EvalArgs& args) {
    const Trial trial = load_input_checkpoint(args.checkpoint);
    const RunConfig& cfg = trial.config();
    const ExecPolicy policy = make_policy(args.policy, args.ssd_thres, cfg.env.r_base, args.tie_eps);
    const EpisodeTrace trace = evaluate(trial.agent(), policy, trial.map(), cfg.env, cfg.eval_episode_cap,
                                        cfg.agent.gamma, args.seed);
    const RouteClass cls = classify_route(trial.map(), route_inventory(trial.map()), trace);
    std::cout << "policy " << policy.name() << "\n";
    std::cout << "visited " << join_nodes(trace.visited) << "\n";
    std::cout << "steps " << trace.actions.size() << ", reached_goal " << (trace.reached_goal ? "yes" : "no")
              << ", discounted_return " << num(trace.discounted_return) << ", route " << to_string(cls) << "\n";
    if (!args.dot.empty()) {
        const std::vector<std::pair<Route, std::string>> routes{
            {compress_visits(trace.visited), policy.name() + " (" + std::string(to_string(cls)) + ")"}};
        write_output(args.dot, render_routes(trial.map(), routes));
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrialsArgs {
    std::string config;
    std::string output_dir;
    int jobs = 0;
    bool checkpoints = true;
};

void write_trial_outputs(const TrialReport& report, const GraphMap& map, const fs::path& dir) {
    try {
        write_report(report, map, dir.string());
    } catch (const IoError& e) {
        throw OutputError(e.what());
    }
    write_output(dir / "config.json", emit_run_config(report.config));
}

int cmd_trials(const TrialsArgs& args) {
    RunConfig cfg = load_input_config(args.config);
    if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
    const GraphMap map = resolve_input_map(cfg.map);
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    TrialOptions opts;
    opts.jobs = args.jobs > 0 ? args.jobs : std::min<int>(static_cast<int>(cfg.seeds.size()), hw);

    auto run_one = [&](const RunConfig& c, const fs::path& dir) {
        TrialOptions o = opts;
        if (args.checkpoints) o.checkpoint_dir = (dir / "checkpoints").string();
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw OutputError("cannot create '" + dir.string() + "'");
        TrialReport report = [&] {
            try {
                return run_trials(c, o);
            } catch (const IoError& e) {
                throw OutputError(e.what());
            }
        }();
        write_trial_outputs(report, map, dir);
        return report;
    };

    if (cfg.lr_sweep.empty()) {
        const TrialReport report = run_one(cfg, cfg.output_dir);
        std::cout << summary_table(report);
        return kOk;
    }

    std::ostringstream sweep;
    sweep << "lr,exec_policy,auc,n_seeds\n";
    for (double lr : cfg.lr_sweep) {
        RunConfig c = cfg;
        c.agent.lr = lr;
        c.lr_sweep.clear();
        char tag[64];
        std::snprintf(tag, sizeof tag, "lr-%g", lr);
        const TrialReport report = run_one(c, fs::path(cfg.output_dir) / tag);
        const auto auc = area_under_curve(report);
        std::cout << "lr " << lr << "\n" << summary_table(report);
        for (std::size_t p = 0; p < auc.size(); ++p) {
            char line[128];
            std::snprintf(line, sizeof line, "%.17g,%s,%.17g,%zu\n", lr, c.exec_policies[p].name().c_str(), auc[p],
                          c.seeds.size());
            sweep << line;
        }
    }
    write_output(fs::path(cfg.output_dir) / "sweep.csv", sweep.str());
    return kOk;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
    std::string map;
    double gamma = 0.99;
    double r_base = 1.0;
    double r_loopback = 0.0;
    double crosswalk_std = 1.0;
    std::string mc_policy;
    int episodes = 10000;
    int quantiles = 4;
    std::uint64_t seed = 0;
};

Route load_route_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open route file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        const auto doc = nlohmann::json::parse(buf.str());
        const auto& nodes = doc.is_object() ? doc.at("nodes") : doc;
        return Route{nodes.get<std::vector<NodeId>>()};
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("route file must be a JSON array of node ids: " + std::string(e.what()));
    }
}

int cmd_oracle(const OracleArgs& args) {
    const GraphMap map = load_input_map(args.map);
    EnvConfig env;
    env.r_base = args.r_base;
    env.r_loopback = args.r_loopback;
    env.crosswalk_std = args.crosswalk_std;
    try {
        env.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    if (!(args.gamma >= 0.0 && args.gamma < 1.0)) throw UsageError("gamma must lie in [0, 1)");

    const oracle::QTable q = oracle::value_iteration(map, env, args.gamma);
    std::cout << "value iteration Q* (gamma " << args.gamma << ", r_base " << args.r_base << ", r_loopback "
              << args.r_loopback << ")\n";
    std::cout << "state";
    for (int a = 0; a < map.action_dim(); ++a) std::cout << "  a" << a;
    std::cout << "\n";
    for (NodeId s = 0; s < map.num_states(); ++s) {
        std::cout << s;
        for (int a = 0; a < map.action_dim(); ++a) std::cout << "  " << num(q.at(s, a));
        std::cout << (map.is_goal(s) ? "  (goal)" : "") << "\n";
    }
    const Route sp = shortest_path(map, map.start(), map.goals());
    std::cout << "shortest path (" << sp.length() << " edges): " << join_nodes(sp.nodes) << "\n";
    std::cout << "greedy Q* rollout: " << join_nodes(oracle::greedy_rollout(map, q).nodes) << "\n";

    if (!args.mc_policy.empty()) {
        const Route route = load_route_file(args.mc_policy);
        std::vector<ActionIndex> policy;
        try {
            policy = oracle::route_policy(map, route);
        } catch (const InvalidRoute& e) {
            throw UsageError(e.what());
        }
        const NodeId start = route.nodes.front();
        const oracle::EmpiricalDist d =
            oracle::mc_returns(map, env, policy, start, args.gamma, args.episodes, args.seed);
        std::cout << "monte-carlo returns over " << args.episodes << " rollouts from " << start << ":\n";
        std::cout << "  mean " << num(oracle::sample_mean(d.samples)) << ", variance "
                  << num(oracle::sample_std(d.samples) * oracle::sample_std(d.samples)) << ", min "
                  << num(d.samples.front()) << ", max " << num(d.samples.back()) << "\n";
        const QuantileDist qd = oracle::empirical_quantiles(d, args.quantiles);
        std::cout << "  quantiles (N=" << args.quantiles << "):";
        for (double x : qd.atoms()) std::cout << " " << num(x);
        std::cout << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
    std::string checkpoint;
    int state = -1;
    std::optional<double> ssd_thres;
};

int cmd_inspect(const InspectArgs& args) {
    const Trial trial = load_input_checkpoint(args.checkpoint);
    const GraphMap& map = trial.map();
    const NodeId s = args.state < 0 ? map.start() : args.state;
    if (!map.valid_state(s)) throw UsageError("state " + std::to_string(s) + " is not in the map");

    const ActionDists dists = trial.agent().dists(s);
    std::cout << "checkpoint seed " << trial.seed() << ", step " << trial.step() << ", state " << s << "\n";
    for (std::size_t a = 0; a < dists.size(); ++a) {
        const NodeId next = transition(map, s, static_cast<ActionIndex>(a));
        std::cout << "  action " << a << " -> " << next << (next == s ? " (loopback)" : "") << ": atoms";
        for (double x : dists[a].atoms()) std::cout << " " << num(x);
        std::cout << "  mean " << num(mean(dists[a])) << "  variance " << num(variance(dists[a])) << "\n";
    }
    const double thres = args.ssd_thres.value_or([&] {
        for (const ExecPolicy& p : trial.config().exec_policies)
            if (p.kind == ExecKind::thresholded_ssd) return p.ssd_thres;
        return 5.0 * trial.config().env.r_base;
    }());
    std::cout << "  greedy -> " << greedy_action(dists) << "\n";
    std::cout << "  ssd    -> " << ssd_action(dists) << "\n";
    std::cout << "  t-ssd  -> " << thresholded_ssd_action(dists, thres) << "  (ssd_thres " << num(thres) << ")\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributional route planning workbench"};
    app.require_subcommand(1, 1);

    GenMapArgs gen;
    auto* c_gen = app.add_subcommand("gen-map", "Generate a two- or three-route scenario map");
    c_gen->add_option("kind", gen.kind, "two-route | three-route")->required();
    c_gen->add_option("--noisy-len", gen.noisy_len, "Edges on the crosswalk route");
    c_gen->add_option("--robust-len", gen.robust_len, "Edges on the (first) robust route");
    c_gen->add_option("--robust2-len", gen.robust2_len, "Edges on the second robust route");
    c_gen->add_option("-o,--output", gen.out, "Output map file")->required();

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Train one seed and write a checkpoint");
    c_train->add_option("config", train.config, "Run config (JSON)");
    c_train->add_option("--seed", train.seed, "Seed (default: first config seed)");
    c_train->add_option("--stop-at", train.stop_at, "Stop after this many env steps");
    c_train->add_option("--resume", train.resume, "Resume from a checkpoint");
    c_train->add_option("--checkpoint", train.checkpoint, "Checkpoint output path");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Roll out an execution policy from a checkpoint");
    c_eval->add_option("checkpoint", ev.checkpoint, "Checkpoint file")->required();
    c_eval->add_option("--policy", ev.policy, "greedy | ssd | t-ssd");
    c_eval->add_option("--ssd-thres", ev.ssd_thres, "Action-gap threshold for t-ssd");
    c_eval->add_option("--tie-eps", ev.tie_eps, "Tie tolerance for ssd");
    c_eval->add_option("--seed", ev.seed, "Seed for crosswalk draws");
    c_eval->add_option("--dot", ev.dot, "Write the route as DOT");

    TrialsArgs trials;
    auto* c_trials = app.add_subcommand("trials", "Train all config seeds and aggregate");
    c_trials->add_option("config", trials.config, "Run config (JSON)")->required();
    c_trials->add_option("--output-dir", trials.output_dir, "Override output_dir");
    c_trials->add_option("--jobs", trials.jobs, "Parallel seeds (default: min(seeds, cores))");
    c_trials->add_flag("!--no-checkpoints", trials.checkpoints, "Skip per-seed checkpoints");

    OracleArgs orc;
    auto* c_oracle = app.add_subcommand("oracle", "Value iteration, shortest path and Monte-Carlo returns");
    c_oracle->add_option("map", orc.map, "Map file")->required();
    c_oracle->add_option("--gamma", orc.gamma, "Discount");
    c_oracle->add_option("--r-base", orc.r_base, "Base reward magnitude");
    c_oracle->add_option("--r-loopback", orc.r_loopback, "Loopback penalty");
    c_oracle->add_option("--crosswalk-std", orc.crosswalk_std, "Crosswalk noise std");
    c_oracle->add_option("--mc-policy", orc.mc_policy, "Route file (JSON node list) to roll out");
    c_oracle->add_option("--episodes", orc.episodes, "Monte-Carlo rollouts");
    c_oracle->add_option("--quantiles", orc.quantiles, "Empirical quantiles to report");
    c_oracle->add_option("--seed", orc.seed, "Monte-Carlo seed");

    InspectArgs ins;
    auto* c_inspect = app.add_subcommand("inspect", "Print per-action return distributions at a state");
    c_inspect->add_option("checkpoint", ins.checkpoint, "Checkpoint file")->required();
    c_inspect->add_option("--state", ins.state, "State id (default: start)");
    c_inspect->add_option("--ssd-thres", ins.ssd_thres, "Threshold for the t-ssd column");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*c_gen) return cmd_gen_map(gen);
        if (*c_train) return cmd_train(train);
        if (*c_eval) return cmd_eval(ev);
        if (*c_trials) return cmd_trials(trials);
        if (*c_oracle) return cmd_oracle(orc);
        if (*c_inspect) return cmd_inspect(ins);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DanglingEdge& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DuplicateAction& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UnreachableGoal& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const BadParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
