#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "qrrn/errors.hpp"
#include "qrrn/trainer.hpp"

namespace qrrn {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'Q', 'R', 'R', 'N'};

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_f64(std::string& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int k = 0; k < bytes; ++k)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
    return v;
}

double get_f64(const std::string& in, std::size_t pos) {
    const std::uint64_t bits = get_le(in, pos, 8);
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
}

json rng_to_json(const Rng& rng) {
    json arr = json::array();
    for (std::uint64_t w : rng.state()) arr.push_back(std::to_string(w));
    return arr;
}

Rng rng_from_json(const json& arr) {
    if (!arr.is_array() || arr.size() != 4) throw CorruptCheckpoint("rng state must have four words");
    Rng::State st{};
    for (std::size_t i = 0; i < 4; ++i) st[i] = std::stoull(arr[i].get<std::string>());
    Rng rng;
    rng.set_state(st);
    return rng;
}

json trace_to_json(const EpisodeTrace& t) {
    return {{"visited", t.visited},
            {"actions", t.actions},
            {"rewards", t.rewards},
            {"discounted_return", t.discounted_return},
            {"reached_goal", t.reached_goal}};
}

EpisodeTrace trace_from_json(const json& j) {
    EpisodeTrace t;
    t.visited = j.at("visited").get<std::vector<NodeId>>();
    t.actions = j.at("actions").get<std::vector<ActionIndex>>();
    t.rewards = j.at("rewards").get<std::vector<double>>();
    t.discounted_return = j.at("discounted_return").get<double>();
    t.reached_goal = j.at("reached_goal").get<bool>();
    return t;
}

}  // namespace

void Trial::save(const std::string& path) const {
    const AgentConfig& acfg = agent_.config();
    std::vector<std::pair<std::string, std::vector<double>>> blocks;
    auto as_vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
    blocks.emplace_back("online", as_vec(agent_.online_params()));
    blocks.emplace_back("target", as_vec(agent_.target_params()));
    blocks.emplace_back("adam_m", agent_.adam().m);
    blocks.emplace_back("adam_v", agent_.adam().v);
    std::vector<double> buf;
    for (const Transition& t : agent_.buffer().ordered()) {
        buf.push_back(t.s);
        buf.push_back(t.a);
        buf.push_back(t.r);
        buf.push_back(t.s_next);
        buf.push_back(t.done ? 1.0 : 0.0);
    }
    blocks.emplace_back("buffer", std::move(buf));

    json header;
    header["format_version"] = kCheckpointVersion;
    header["config"] = json::parse(emit_run_config(cfg_));
    header["map"] = json::parse(emit_map(*map_));
    header["seed"] = std::to_string(seed_);
    header["step"] = step_;
    header["episode_index"] = episode_index_;
    header["updates"] = agent_.updates();
    header["backend"] = std::string(to_string(acfg.backend));
    if (const DenseNet* net = agent_.online_net())
        header["dims"] = net->dims();
    else
        header["dims"] = {agent_.num_states(), agent_.action_dim(), agent_.n_quantiles()};
    header["adam"] = {{"step", agent_.adam().step},
                      {"beta1", agent_.adam().beta1},
                      {"beta2", agent_.adam().beta2},
                      {"eps", agent_.adam().eps}};
    header["env"] = {{"current", env_.current},
                     {"prev", env_.prev},
                     {"steps", env_.steps},
                     {"done", env_.done},
                     {"rng", rng_to_json(env_.rng)}};
    header["behavior_rng"] = rng_to_json(behavior_rng_);
    json records = json::array();
    for (const EvalRecord& r : records_)
        records.push_back({{"step", r.step},
                           {"policy", r.policy},
                           {"route_class", std::string(to_string(r.route_class))},
                           {"trace", trace_to_json(r.trace)}});
    header["records"] = records;
    json jblocks = json::array();
    for (const auto& [name, data] : blocks) jblocks.push_back({{"name", name}, {"length", data.size()}});
    header["blocks"] = jblocks;

    const std::string text = header.dump();
    std::string out(kMagic, 4);
    put_u16(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& [name, data] : blocks)
        for (double x : data) put_f64(out, x);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing checkpoint '" + path + "'");
}

Trial Trial::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path + "'");
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (in.size() < 10) throw CorruptCheckpoint("file too short");
    if (std::memcmp(in.data(), kMagic, 4) != 0) throw CorruptCheckpoint("bad magic bytes");
    const auto version = static_cast<std::uint16_t>(get_le(in, 4, 2));
    if (version != kCheckpointVersion)
        throw VersionMismatch("checkpoint format " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    const auto header_len = static_cast<std::size_t>(get_le(in, 6, 4));
    if (10 + header_len > in.size()) throw CorruptCheckpoint("header extends past end of file");

    try {
        const json header = json::parse(in.begin() + 10, in.begin() + 10 + static_cast<std::ptrdiff_t>(header_len));

        RunConfig cfg = parse_run_config(header.at("config").dump());
        auto map = std::make_shared<const GraphMap>(parse_map(header.at("map").dump()));
        const std::uint64_t seed = std::stoull(header.at("seed").get<std::string>());
        if (header.at("backend").get<std::string>() != to_string(cfg.agent.backend))
            throw CorruptCheckpoint("backend tag disagrees with config");

        Trial trial(std::move(cfg), std::move(map), seed, false);
        Agent& agent = trial.agent_;

        std::vector<int> dims = header.at("dims").get<std::vector<int>>();
        const std::vector<int> expect_dims =
            agent.online_net() ? agent.online_net()->dims()
                               : std::vector<int>{agent.num_states(), agent.action_dim(), agent.n_quantiles()};
        if (dims != expect_dims) throw CorruptCheckpoint("parameter dims disagree with config and map");

        std::size_t pos = 10 + header_len;
        std::size_t total = 0;
        for (const json& b : header.at("blocks")) total += b.at("length").get<std::size_t>();
        if (in.size() != pos + 8 * total) throw CorruptCheckpoint("parameter payload length mismatch");

        auto read_block = [&](const json& b, std::span<double> dst) {
            if (b.at("length").get<std::size_t>() != dst.size())
                throw CorruptCheckpoint("block '" + b.at("name").get<std::string>() + "' has wrong length");
            for (double& x : dst) {
                x = get_f64(in, pos);
                pos += 8;
            }
        };
        const json& blocks = header.at("blocks");
        if (blocks.size() != 5) throw CorruptCheckpoint("expected five parameter blocks");
        const char* names[] = {"online", "target", "adam_m", "adam_v", "buffer"};
        for (std::size_t i = 0; i < 5; ++i)
            if (blocks[i].at("name").get<std::string>() != names[i])
                throw CorruptCheckpoint("unexpected block order");

        read_block(blocks[0], agent.online_params());
        read_block(blocks[1], agent.target_params());
        read_block(blocks[2], agent.adam().m);
        read_block(blocks[3], agent.adam().v);
        const auto buf_len = blocks[4].at("length").get<std::size_t>();
        if (buf_len % 5 != 0) throw CorruptCheckpoint("replay buffer block is not a multiple of 5");
        std::vector<double> raw(buf_len);
        read_block(blocks[4], raw);
        std::vector<Transition> items;
        for (std::size_t i = 0; i < raw.size(); i += 5)
            items.push_back({static_cast<NodeId>(raw[i]), static_cast<ActionIndex>(raw[i + 1]), raw[i + 2],
                             static_cast<NodeId>(raw[i + 3]), raw[i + 4] != 0.0});
        agent.buffer().restore(std::move(items));

        const json& adam = header.at("adam");
        agent.adam().step = adam.at("step").get<std::int64_t>();
        agent.adam().beta1 = adam.at("beta1").get<double>();
        agent.adam().beta2 = adam.at("beta2").get<double>();
        agent.adam().eps = adam.at("eps").get<double>();
        agent.set_updates(header.at("updates").get<std::int64_t>());

        trial.step_ = header.at("step").get<std::int64_t>();
        trial.episode_index_ = header.at("episode_index").get<std::int64_t>();
        const json& env = header.at("env");
        trial.env_.map = trial.map_.get();
        trial.env_.current = env.at("current").get<NodeId>();
        trial.env_.prev = env.at("prev").get<NodeId>();
        trial.env_.steps = env.at("steps").get<int>();
        trial.env_.done = env.at("done").get<bool>();
        trial.env_.rng = rng_from_json(env.at("rng"));
        if (!trial.map_->valid_state(trial.env_.current) || !trial.map_->valid_state(trial.env_.prev))
            throw CorruptCheckpoint("env state references an unknown node");
        trial.behavior_rng_ = rng_from_json(header.at("behavior_rng"));

        for (const json& r : header.at("records")) {
            EvalRecord rec;
            rec.step = r.at("step").get<std::int64_t>();
            rec.policy = r.at("policy").get<std::size_t>();
            rec.route_class = parse_route_class(r.at("route_class").get<std::string>());
            rec.trace = trace_from_json(r.at("trace"));
            trial.records_.push_back(std::move(rec));
        }
        return trial;
    } catch (const json::exception& e) {
        throw CorruptCheckpoint(std::string("malformed header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CorruptCheckpoint(std::string("malformed number: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw CorruptCheckpoint(std::string("number out of range: ") + e.what());
    } catch (const ConfigError& e) {
        throw CorruptCheckpoint(std::string("embedded config: ") + e.what());
    } catch (const SchemaError& e) {
        throw CorruptCheckpoint(std::string("embedded map: ") + e.what());
    }
}

}  // namespace qrrn
