#include "qrrn/quantdist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qrrn/errors.hpp"

namespace qrrn {

QuantileDist::QuantileDist(std::vector<double> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw BadN("a quantile distribution needs at least one atom");
    for (double a : atoms_)
        if (!std::isfinite(a)) throw BadN("non-finite atom");
}

std::vector<double> QuantileDist::sorted() const {
    std::vector<double> s = atoms_;
    std::sort(s.begin(), s.end());
    return s;
}

std::vector<double> midpoints(int n) {
    if (n < 1) throw BadN("N must be >= 1, got " + std::to_string(n));
    std::vector<double> taus(n);
    for (int i = 1; i <= n; ++i) taus[i - 1] = (2.0 * i - 1.0) / (2.0 * n);
    return taus;
}

double mean(const QuantileDist& d) {
    const auto a = d.atoms();
    return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

double variance(const QuantileDist& d) {
    const double m = mean(d);
    double acc = 0.0;
    for (double x : d.atoms()) acc += (x - m) * (x - m);
    return acc / static_cast<double>(d.size());
}

double second_moment(const QuantileDist& d) {
    double acc = 0.0;
    for (double x : d.atoms()) acc += x * x;
    return acc / static_cast<double>(d.size());
}

double cvar(const QuantileDist& d, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw BadAlpha("alpha must lie in (0, 1]");
    const auto s = d.sorted();
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(s.size()) - 1e-12)));
    return std::accumulate(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
           static_cast<double>(k);
}

double huber(double u, double kappa) {
    const double a = std::abs(u);
    return a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
}

double quantile_huber(double u, double tau, double kappa) {
    const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    return weight * huber(u, kappa) / kappa;
}

double quantile_huber_grad(double u, double tau, double kappa) {
    if (u == 0.0) return 0.0;
    const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    if (std::abs(u) <= kappa) return weight * u / kappa;
    return weight * (u > 0.0 ? 1.0 : -1.0);
}

double integrated_cdf(const QuantileDist& d, double z) {
    double acc = 0.0;
    for (double x : d.atoms()) acc += std::max(0.0, z - x);
    return acc / static_cast<double>(d.size());
}

bool ssd_dominates(const QuantileDist& a, const QuantileDist& b) {
    double scale = 1.0;
    for (double x : a.atoms()) scale = std::max(scale, std::abs(x));
    for (double x : b.atoms()) scale = std::max(scale, std::abs(x));
    const double eps = 1e-9 * scale;

    // Beyond the last kink both integrated CDFs are z - mean.
    if (mean(a) < mean(b) - eps) return false;
    auto check = [&](double z) { return integrated_cdf(a, z) <= integrated_cdf(b, z) + eps; };
    for (double z : a.atoms())
        if (!check(z)) return false;
    for (double z : b.atoms())
        if (!check(z)) return false;
    return true;
}

}  // namespace qrrn
