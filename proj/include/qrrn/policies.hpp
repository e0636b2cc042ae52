#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qrrn/quantdist.hpp"
#include "qrrn/roadnet.hpp"

namespace qrrn {

/// Per-action return distributions at one state.
using ActionDists = std::vector<QuantileDist>;

enum class ExecKind { greedy, ssd, thresholded_ssd };

struct ExecPolicy {
    ExecKind kind = ExecKind::greedy;
    double ssd_thres = 0.0;  // thresholded_ssd only
    double tie_eps = 0.0;    // ssd only: means closer than this count as tied

    /// "greedy", "ssd" or "t-ssd".
    std::string name() const;
    friend bool operator==(const ExecPolicy&, const ExecPolicy&) = default;
};

ExecKind parse_exec_kind(std::string_view s);

/// argmax of the means; ties go to the lowest index.
ActionIndex greedy_action(std::span<const QuantileDist> dists);

/// The two actions with largest means, ties to the lowest index. Throws
/// TooFewActions for fewer than two actions.
std::pair<ActionIndex, ActionIndex> top2(std::span<const QuantileDist> dists);

/// Exact SSD: a1 unless mean(a1) - mean(a2) <= tie_eps, in which case the
/// smaller raw second moment wins (a1 on equality).
ActionIndex ssd_action(std::span<const QuantileDist> dists, double tie_eps = 0.0);

/// Thresholded SSD: a1 when the top-2 action gap exceeds `thres`, otherwise
/// the smaller population variance wins (a1 on equality).
ActionIndex thresholded_ssd_action(std::span<const QuantileDist> dists, double thres);

ActionIndex select_action(const ExecPolicy& policy, std::span<const QuantileDist> dists);

}  // namespace qrrn
