#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qrrn/errors.hpp"
#include "qrrn/trainer.hpp"

namespace qrrn {

namespace {

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string curves_csv(const TrialReport& report) {
    std::ostringstream out;
    out << "seed,exec_policy,step,discounted_return,reached_goal,route_class\n";
    const auto& policies = report.config.exec_policies;
    for (const SeedResult& s : report.seeds)
        for (std::size_t p = 0; p < policies.size(); ++p)
            for (const EvalRecord& r : s.records) {
                if (r.policy != p) continue;
                out << s.seed << ',' << policies[p].name() << ',' << r.step << ','
                    << num(r.trace.discounted_return) << ',' << (r.trace.reached_goal ? 1 : 0) << ','
                    << to_string(r.route_class) << '\n';
            }
    return out.str();
}

std::string aggregate_csv(const TrialReport& report) {
    std::ostringstream out;
    out << "exec_policy,step,mean_return,stderr_return,n_seeds\n";
    for (const AggregatePoint& pt : report.aggregate)
        out << report.config.exec_policies[pt.policy].name() << ',' << pt.step << ','
            << num(pt.mean_return) << ',' << num(pt.stderr_return) << ',' << pt.n_seeds << '\n';
    return out.str();
}

std::string summary_table(const TrialReport& report) {
    std::ostringstream out;
    const RouteClass classes[] = {RouteClass::noisy, RouteClass::robust1, RouteClass::robust2,
                                  RouteClass::other, RouteClass::timeout};
    char line[160];
    std::snprintf(line, sizeof line, "%-8s", "policy");
    out << line;
    for (RouteClass c : classes) {
        std::snprintf(line, sizeof line, " %9s", std::string(to_string(c)).c_str());
        out << line;
    }
    out << "   final mean return\n";
    const auto auc_points = report.config.total_steps / report.config.eval_interval;
    for (std::size_t p = 0; p < report.histogram.size(); ++p) {
        std::snprintf(line, sizeof line, "%-8s", report.config.exec_policies[p].name().c_str());
        out << line;
        for (int k = 0; k < 5; ++k) {
            std::snprintf(line, sizeof line, " %9d", report.histogram[p][k]);
            out << line;
        }
        const AggregatePoint& last = report.aggregate[p * auc_points + auc_points - 1];
        std::snprintf(line, sizeof line, "   %8.3f +/- %.3f\n", last.mean_return, last.stderr_return);
        out << line;
    }
    return out.str();
}

std::string final_routes_dot(const TrialReport& report, const GraphMap& map, std::size_t policy) {
    // Distinct compressed final routes, in order of first appearance.
    std::vector<std::pair<Route, std::string>> routes;
    std::vector<int> counts;
    std::vector<RouteClass> classes;
    for (const SeedResult& s : report.seeds) {
        if (policy >= s.final_trace.size()) continue;
        const Route r = compress_visits(s.final_trace[policy].visited);
        if (r.nodes.empty()) continue;
        auto it = std::find_if(routes.begin(), routes.end(), [&](const auto& e) { return e.first == r; });
        if (it == routes.end()) {
            routes.emplace_back(r, "");
            counts.push_back(1);
            classes.push_back(s.final_class[policy]);
        } else {
            ++counts[static_cast<std::size_t>(it - routes.begin())];
        }
    }
    for (std::size_t i = 0; i < routes.size(); ++i)
        routes[i].second = std::string(to_string(classes[i])) + " (" + std::to_string(counts[i]) + " seeds)";
    return render_routes(map, routes);
}

std::string aggregate_svg(const TrialReport& report) {
    constexpr double W = 640, H = 400, L = 70, R = 130, T = 30, B = 50;
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    if (report.aggregate.empty()) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";

    double xmax = 0, ymin = 0, ymax = 0;
    bool first = true;
    for (const AggregatePoint& pt : report.aggregate) {
        xmax = std::max(xmax, static_cast<double>(pt.step));
        const double lo = pt.mean_return - pt.stderr_return, hi = pt.mean_return + pt.stderr_return;
        ymin = first ? lo : std::min(ymin, lo);
        ymax = first ? hi : std::max(ymax, hi);
        first = false;
    }
    if (ymax - ymin < 1e-9) {
        ymin -= 1.0;
        ymax += 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto sx = [&](double x) { return L + (W - L - R) * x / xmax; };
    auto sy = [&](double y) { return T + (H - T - B) * (ymax - y) / (ymax - ymin); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double y = ymin + (ymax - ymin) * k / 4.0;
        char label[32];
        std::snprintf(label, sizeof label, "%.1f", y);
        svg << "<text x=\"" << L - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << label << "</text>\n";
        const double x = xmax * k / 4.0;
        std::snprintf(label, sizeof label, "%.0f", x);
        svg << "<text x=\"" << sx(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << label
            << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">step</text>\n";
    svg << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 15 " << (T + H - B) / 2
        << ")\" text-anchor=\"middle\">discounted return</text>\n";

    const std::size_t np = report.config.exec_policies.size();
    for (std::size_t p = 0; p < np; ++p) {
        std::vector<AggregatePoint> pts;
        for (const AggregatePoint& pt : report.aggregate)
            if (pt.policy == p) pts.push_back(pt);
        const char* color = kColors[p % std::size(kColors)];
        std::ostringstream band, line;
        for (const auto& pt : pts) band << sx(pt.step) << ',' << sy(pt.mean_return + pt.stderr_return) << ' ';
        for (auto it = pts.rbegin(); it != pts.rend(); ++it)
            band << sx(it->step) << ',' << sy(it->mean_return - it->stderr_return) << ' ';
        for (const auto& pt : pts) line << sx(pt.step) << ',' << sy(pt.mean_return) << ' ';
        svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.2\"/>\n";
        svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (p + 1) << "\" fill=\"" << color << "\">"
            << report.config.exec_policies[p].name() << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_report(const TrialReport& report, const GraphMap& map, const std::string& dir) {
    const std::filesystem::path root(dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
    write_file(root / "curves.csv", curves_csv(report));
    write_file(root / "aggregate.csv", aggregate_csv(report));
    write_file(root / "aggregate.svg", aggregate_svg(report));
    for (std::size_t p = 0; p < report.config.exec_policies.size(); ++p)
        write_file(root / ("routes-" + report.config.exec_policies[p].name() + ".dot"),
                   final_routes_dot(report, map, p));
}

}  // namespace qrrn
