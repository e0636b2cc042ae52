#include "qrrn/policies.hpp"

#include "qrrn/errors.hpp"

namespace qrrn {

std::string ExecPolicy::name() const {
    switch (kind) {
        case ExecKind::greedy: return "greedy";
        case ExecKind::ssd: return "ssd";
        case ExecKind::thresholded_ssd: return "t-ssd";
    }
    return "greedy";
}

ExecKind parse_exec_kind(std::string_view s) {
    if (s == "greedy") return ExecKind::greedy;
    if (s == "ssd") return ExecKind::ssd;
    if (s == "t-ssd") return ExecKind::thresholded_ssd;
    throw ConfigError("unknown exec_policy '" + std::string(s) + "'");
}

ActionIndex greedy_action(std::span<const QuantileDist> dists) {
    if (dists.empty()) throw TooFewActions("no actions");
    ActionIndex best = 0;
    double best_mean = mean(dists[0]);
    for (std::size_t a = 1; a < dists.size(); ++a) {
        const double m = mean(dists[a]);
        if (m > best_mean) {
            best_mean = m;
            best = static_cast<ActionIndex>(a);
        }
    }
    return best;
}

std::pair<ActionIndex, ActionIndex> top2(std::span<const QuantileDist> dists) {
    if (dists.size() < 2) throw TooFewActions("top-2 needs at least two actions");
    const ActionIndex a1 = greedy_action(dists);
    ActionIndex a2 = -1;
    double m2 = 0.0;
    for (std::size_t a = 0; a < dists.size(); ++a) {
        if (static_cast<ActionIndex>(a) == a1) continue;
        const double m = mean(dists[a]);
        if (a2 < 0 || m > m2) {
            a2 = static_cast<ActionIndex>(a);
            m2 = m;
        }
    }
    return {a1, a2};
}

ActionIndex ssd_action(std::span<const QuantileDist> dists, double tie_eps) {
    if (dists.size() == 1) return 0;
    const auto [a1, a2] = top2(dists);
    if (mean(dists[a1]) - mean(dists[a2]) > tie_eps) return a1;
    return second_moment(dists[a2]) < second_moment(dists[a1]) ? a2 : a1;
}

ActionIndex thresholded_ssd_action(std::span<const QuantileDist> dists, double thres) {
    if (dists.size() == 1) return 0;
    const auto [a1, a2] = top2(dists);
    if (mean(dists[a1]) - mean(dists[a2]) > thres) return a1;
    return variance(dists[a2]) < variance(dists[a1]) ? a2 : a1;
}

ActionIndex select_action(const ExecPolicy& policy, std::span<const QuantileDist> dists) {
    switch (policy.kind) {
        case ExecKind::greedy: return greedy_action(dists);
        case ExecKind::ssd: return ssd_action(dists, policy.tie_eps);
        case ExecKind::thresholded_ssd: return thresholded_ssd_action(dists, policy.ssd_thres);
    }
    return greedy_action(dists);
}

}  // namespace qrrn
