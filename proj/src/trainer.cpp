#include "qrrn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "qrrn/errors.hpp"

namespace qrrn {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Run config

void RunConfig::validate() const {
    env.validate();
    agent.validate();
    if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
    if (total_steps < eval_interval) throw ConfigError("total_steps must be >= eval_interval");
    if (eval_episode_cap < 1) throw ConfigError("eval_episode_cap must be >= 1");
    if (exec_policies.empty()) throw ConfigError("exec_policies must not be empty");
    for (const ExecPolicy& p : exec_policies)
        if (!(p.ssd_thres >= 0.0) || !(p.tie_eps >= 0.0))
            throw ConfigError("ssd_thres and tie_eps must be >= 0");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    for (double lr : lr_sweep)
        if (!(lr > 0.0)) throw ConfigError("lr_sweep entries must be > 0");
}

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        const json& v = obj.at(key);
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(std::string(key) + " must be a string");
        }
        out = v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
    }
}

std::string_view encoding_name(ObsEncoding e) { return e == ObsEncoding::one_hot ? "one-hot" : "index"; }

ObsEncoding parse_encoding(std::string_view s) {
    if (s == "one-hot") return ObsEncoding::one_hot;
    if (s == "index") return ObsEncoding::index;
    throw ConfigError("unknown obs_encoding '" + std::string(s) + "'");
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    check_keys(doc,
               {"map", "env", "agent", "total_steps", "eval_interval", "eval_episode_cap",
                "exec_policies", "seeds", "output_dir", "lr_sweep"},
               "run config");
    RunConfig cfg;

    if (!doc.contains("map")) throw ConfigError("missing key 'map'");
    const json& jm = doc["map"];
    check_keys(jm, {"file", "generator", "noisy_len", "robust_len", "robust2_len"}, "map");
    if (jm.contains("file") == jm.contains("generator"))
        throw ConfigError("map needs exactly one of 'file' or 'generator'");
    if (jm.contains("file")) {
        std::string file;
        read(jm, "file", file);
        std::filesystem::path p(file);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        cfg.map.file = p.lexically_normal().string();
    } else {
        std::string kind;
        read(jm, "generator", kind);
        try {
            cfg.map.kind = parse_scenario_kind(kind);
        } catch (const BadParams& e) {
            throw ConfigError(e.what());
        }
        read(jm, "noisy_len", cfg.map.params.noisy_len);
        read(jm, "robust_len", cfg.map.params.robust_len);
        read(jm, "robust2_len", cfg.map.params.robust2_len);
    }

    if (doc.contains("env")) {
        const json& je = doc["env"];
        check_keys(je, {"r_base", "r_loopback", "crosswalk_std", "episode_cap", "obs_encoding"}, "env");
        read(je, "r_base", cfg.env.r_base);
        read(je, "r_loopback", cfg.env.r_loopback);
        read(je, "crosswalk_std", cfg.env.crosswalk_std);
        read(je, "episode_cap", cfg.env.episode_cap);
        std::string enc(encoding_name(cfg.env.obs_encoding));
        read(je, "obs_encoding", enc);
        cfg.env.obs_encoding = parse_encoding(enc);
    }

    if (doc.contains("agent")) {
        const json& ja = doc["agent"];
        check_keys(ja,
                   {"n_quantiles", "gamma", "lr", "buffer_size", "batch_size", "gradient_steps",
                    "exploration_fraction", "exploration_final_eps", "target_sync_interval", "backend",
                    "kappa", "optimizer", "hidden"},
                   "agent");
        AgentConfig& a = cfg.agent;
        read(ja, "n_quantiles", a.n_quantiles);
        read(ja, "gamma", a.gamma);
        read(ja, "lr", a.lr);
        read(ja, "buffer_size", a.buffer_size);
        read(ja, "batch_size", a.batch_size);
        read(ja, "gradient_steps", a.gradient_steps);
        read(ja, "exploration_fraction", a.exploration_fraction);
        read(ja, "exploration_final_eps", a.exploration_final_eps);
        read(ja, "target_sync_interval", a.target_sync_interval);
        read(ja, "kappa", a.kappa);
        std::string backend(to_string(a.backend)), optimizer(to_string(a.optimizer));
        read(ja, "backend", backend);
        read(ja, "optimizer", optimizer);
        a.backend = parse_backend(backend);
        a.optimizer = parse_optimizer(optimizer);
        read(ja, "hidden", a.hidden);
    }

    read(doc, "total_steps", cfg.total_steps);
    read(doc, "eval_interval", cfg.eval_interval);
    read(doc, "eval_episode_cap", cfg.eval_episode_cap);
    read(doc, "output_dir", cfg.output_dir);
    read(doc, "lr_sweep", cfg.lr_sweep);

    if (doc.contains("seeds")) {
        const json& js = doc["seeds"];
        if (!js.is_array()) throw ConfigError("seeds must be an array");
        for (const json& s : js) {
            if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0))
                throw ConfigError("seeds must be non-negative integers");
            cfg.seeds.push_back(s.get<std::uint64_t>());
        }
    }

    if (doc.contains("exec_policies")) {
        const json& jp = doc["exec_policies"];
        if (!jp.is_array()) throw ConfigError("exec_policies must be an array");
        for (const json& p : jp) {
            check_keys(p, {"exec_policy", "ssd_thres", "tie_eps"}, "exec_policies entry");
            std::string kind;
            read(p, "exec_policy", kind);
            ExecPolicy ep;
            ep.kind = parse_exec_kind(kind);
            ep.ssd_thres = 5.0 * cfg.env.r_base;
            read(p, "ssd_thres", ep.ssd_thres);
            read(p, "tie_eps", ep.tie_eps);
            cfg.exec_policies.push_back(ep);
        }
    } else {
        cfg.exec_policies = {{ExecKind::greedy}, {ExecKind::ssd},
                             {ExecKind::thresholded_ssd, 5.0 * cfg.env.r_base}};
    }

    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), std::filesystem::path(path).parent_path().string());
}

namespace {

json config_to_json(const RunConfig& cfg) {
    json j;
    if (cfg.map.generated()) {
        j["map"] = {{"generator", std::string(to_string(cfg.map.kind))},
                    {"noisy_len", cfg.map.params.noisy_len},
                    {"robust_len", cfg.map.params.robust_len}};
        if (cfg.map.kind == ScenarioKind::three_route) j["map"]["robust2_len"] = cfg.map.params.robust2_len;
    } else {
        j["map"] = {{"file", cfg.map.file}};
    }
    j["env"] = {{"r_base", cfg.env.r_base},
                {"r_loopback", cfg.env.r_loopback},
                {"crosswalk_std", cfg.env.crosswalk_std},
                {"episode_cap", cfg.env.episode_cap},
                {"obs_encoding", std::string(encoding_name(cfg.env.obs_encoding))}};
    const AgentConfig& a = cfg.agent;
    j["agent"] = {{"n_quantiles", a.n_quantiles},
                  {"gamma", a.gamma},
                  {"lr", a.lr},
                  {"buffer_size", a.buffer_size},
                  {"batch_size", a.batch_size},
                  {"gradient_steps", a.gradient_steps},
                  {"exploration_fraction", a.exploration_fraction},
                  {"exploration_final_eps", a.exploration_final_eps},
                  {"target_sync_interval", a.target_sync_interval},
                  {"backend", std::string(to_string(a.backend))},
                  {"kappa", a.kappa},
                  {"optimizer", std::string(to_string(a.optimizer))},
                  {"hidden", a.hidden}};
    j["total_steps"] = cfg.total_steps;
    j["eval_interval"] = cfg.eval_interval;
    j["eval_episode_cap"] = cfg.eval_episode_cap;
    json policies = json::array();
    for (const ExecPolicy& p : cfg.exec_policies)
        policies.push_back({{"exec_policy", p.name()}, {"ssd_thres", p.ssd_thres}, {"tie_eps", p.tie_eps}});
    j["exec_policies"] = policies;
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir;
    j["lr_sweep"] = cfg.lr_sweep;
    return j;
}

}  // namespace

std::string emit_run_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

GraphMap resolve_map(const MapSource& src) {
    if (src.generated()) return generate_scenario(src.kind, src.params);
    return load_map_file(src.file);
}

// ---------------------------------------------------------------------------
// Evaluation and route classification

double discounted_sum(const std::vector<double>& rewards, double gamma) {
    double ret = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        ret += discount * r;
        discount *= gamma;
    }
    return ret;
}

EpisodeTrace evaluate(const Agent& agent, const ExecPolicy& exec, const GraphMap& map,
                      const EnvConfig& env_cfg, int episode_cap, double gamma, std::uint64_t seed) {
    EnvConfig cfg = env_cfg;
    cfg.episode_cap = episode_cap;
    EnvState env = reset(map, cfg, seed);
    EpisodeTrace trace;
    trace.visited.push_back(env.current);
    while (!env.done) {
        const ActionIndex a = select_action(exec, agent.dists(env.current));
        const StepResult res = step(env, cfg, a);
        trace.actions.push_back(a);
        trace.rewards.push_back(res.reward);
        trace.visited.push_back(env.current);
    }
    trace.reached_goal = map.is_goal(env.current);
    trace.discounted_return = discounted_sum(trace.rewards, gamma);
    return trace;
}

std::string_view to_string(RouteClass c) {
    switch (c) {
        case RouteClass::noisy: return "noisy";
        case RouteClass::robust1: return "robust-1";
        case RouteClass::robust2: return "robust-2";
        case RouteClass::other: return "other";
        case RouteClass::timeout: return "timeout";
    }
    return "other";
}

RouteClass parse_route_class(std::string_view s) {
    for (RouteClass c : {RouteClass::noisy, RouteClass::robust1, RouteClass::robust2, RouteClass::other,
                         RouteClass::timeout})
        if (to_string(c) == s) return c;
    throw CorruptCheckpoint("unknown route class '" + std::string(s) + "'");
}

RouteInventory route_inventory(const GraphMap& map) {
    RouteInventory inv;
    inv.all = enumerate_simple_paths(map, map.start(), map.num_states());
    for (const Route& r : inv.all)
        if (!route_has_crosswalk(map, r)) inv.crosswalk_free.push_back(r);
    return inv;
}

RouteClass classify_route(const GraphMap& map, const RouteInventory& inv, const EpisodeTrace& trace) {
    if (!trace.reached_goal) return RouteClass::timeout;
    const Route route = compress_visits(trace.visited);
    std::vector<NodeId> sorted = route.nodes;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return RouteClass::other;
    if (route_has_crosswalk(map, route)) return RouteClass::noisy;
    const auto it = std::find(inv.crosswalk_free.begin(), inv.crosswalk_free.end(), route);
    if (it == inv.crosswalk_free.end()) return RouteClass::other;
    const auto rank = it - inv.crosswalk_free.begin();
    if (rank == 0) return RouteClass::robust1;
    if (rank == 1) return RouteClass::robust2;
    return RouteClass::other;
}

// ---------------------------------------------------------------------------
// Trial

namespace {

enum StreamKey : std::uint64_t { kEnvStream = 1, kBehaviorStream = 2, kInitStream = 3, kEvalStream = 4 };

}  // namespace

Trial::Trial(RunConfig cfg, std::shared_ptr<const GraphMap> map, std::uint64_t seed)
    : Trial(std::move(cfg), std::move(map), seed, true) {}

Trial::Trial(RunConfig cfg, std::shared_ptr<const GraphMap> map, std::uint64_t seed, bool fresh)
    : cfg_(std::move(cfg)),
      map_(std::move(map)),
      inventory_(route_inventory(*map_)),
      seed_(seed),
      agent_(cfg_.agent, map_->num_states(), map_->action_dim(), cfg_.env.obs_encoding,
             derive_seed(seed, kInitStream)),
      behavior_rng_(derive_seed(seed, kBehaviorStream)) {
    cfg_.validate();
    if (fresh) start_episode();
}

void Trial::start_episode() {
    env_ = reset(*map_, cfg_.env, derive_seed(derive_seed(seed_, kEnvStream), episode_index_));
}

void Trial::evaluate_all() {
    const auto eval_index = static_cast<std::uint64_t>(step_ / cfg_.eval_interval);
    const std::uint64_t eval_seed = derive_seed(derive_seed(seed_, kEvalStream), eval_index);
    for (std::size_t p = 0; p < cfg_.exec_policies.size(); ++p) {
        EvalRecord rec;
        rec.step = step_;
        rec.policy = p;
        rec.trace = evaluate(agent_, cfg_.exec_policies[p], *map_, cfg_.env, cfg_.eval_episode_cap,
                             cfg_.agent.gamma, eval_seed);
        rec.route_class = classify_route(*map_, inventory_, rec.trace);
        records_.push_back(std::move(rec));
    }
}

void Trial::run_until(std::int64_t target) {
    target = std::min(target, cfg_.total_steps);
    const AgentConfig& acfg = cfg_.agent;
    const int sync_interval = acfg.effective_sync_interval();
    while (step_ < target) {
        const NodeId s = env_.current;
        const ActionIndex a = behavior_action(agent_, s, step_, cfg_.total_steps, behavior_rng_);
        const StepResult res = qrrn::step(env_, cfg_.env, a);
        agent_.buffer().push({s, a, res.reward, env_.current, map_->is_goal(env_.current)});
        ++step_;

        if (agent_.buffer().size() >= acfg.batch_size)
            for (int g = 0; g < acfg.gradient_steps; ++g) {
                const auto batch = agent_.buffer().sample(acfg.batch_size, behavior_rng_);
                qr_update(agent_, batch);
            }
        if (step_ % sync_interval == 0) agent_.sync_target();

        if (env_.done) {
            ++episode_index_;
            start_episode();
        }
        if (step_ % cfg_.eval_interval == 0) evaluate_all();
    }
}

// ---------------------------------------------------------------------------
// Multi-seed trials

SeedResult summarize_trial(const Trial& trial) {
    SeedResult out;
    out.seed = trial.seed();
    out.records = trial.records();
    const std::size_t np = trial.config().exec_policies.size();
    out.final_class.assign(np, RouteClass::timeout);
    out.final_trace.assign(np, EpisodeTrace{});
    for (const EvalRecord& r : out.records) {
        out.final_class[r.policy] = r.route_class;
        out.final_trace[r.policy] = r.trace;
    }
    return out;
}

TrialReport run_trials(const RunConfig& cfg, const TrialOptions& opts) {
    cfg.validate();
    const auto map = std::make_shared<const GraphMap>(resolve_map(cfg.map));
    const std::size_t n = cfg.seeds.size();
    std::vector<SeedResult> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                Trial trial(cfg, map, cfg.seeds[i]);
                trial.run();
                if (!opts.checkpoint_dir.empty())
                    trial.save((std::filesystem::path(opts.checkpoint_dir) /
                                ("seed-" + std::to_string(cfg.seeds[i]) + ".qrrn"))
                                   .string());
                results[i] = summarize_trial(trial);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int jobs = std::clamp(opts.jobs, 1, static_cast<int>(n));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return aggregate(cfg, std::move(results));
}

TrialReport aggregate(const RunConfig& cfg, std::vector<SeedResult> seeds) {
    TrialReport report;
    report.config = cfg;
    report.seeds = std::move(seeds);
    const std::size_t np = cfg.exec_policies.size();
    const std::int64_t points = cfg.total_steps / cfg.eval_interval;

    for (std::size_t p = 0; p < np; ++p) {
        for (std::int64_t k = 1; k <= points; ++k) {
            const std::int64_t step = k * cfg.eval_interval;
            std::vector<double> xs;
            for (const SeedResult& s : report.seeds)
                for (const EvalRecord& r : s.records)
                    if (r.policy == p && r.step == step) xs.push_back(r.trace.discounted_return);
            AggregatePoint pt;
            pt.policy = p;
            pt.step = step;
            pt.n_seeds = static_cast<int>(xs.size());
            if (!xs.empty()) {
                double sum = 0.0;
                for (double x : xs) sum += x;
                pt.mean_return = sum / static_cast<double>(xs.size());
                if (xs.size() > 1) {
                    double ss = 0.0;
                    for (double x : xs) ss += (x - pt.mean_return) * (x - pt.mean_return);
                    const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
                    pt.stderr_return = sd / std::sqrt(static_cast<double>(xs.size()));
                }
            }
            report.aggregate.push_back(pt);
        }
    }

    report.histogram.assign(np, std::vector<int>(5, 0));
    for (const SeedResult& s : report.seeds)
        for (std::size_t p = 0; p < np && p < s.final_class.size(); ++p)
            ++report.histogram[p][static_cast<int>(s.final_class[p])];
    return report;
}

std::vector<double> area_under_curve(const TrialReport& report) {
    const std::size_t np = report.config.exec_policies.size();
    std::vector<double> auc(np, 0.0);
    std::vector<int> count(np, 0);
    for (const AggregatePoint& pt : report.aggregate) {
        auc[pt.policy] += pt.mean_return;
        ++count[pt.policy];
    }
    for (std::size_t p = 0; p < np; ++p)
        if (count[p] > 0) auc[p] /= count[p];
    return auc;
}

}  // namespace qrrn
