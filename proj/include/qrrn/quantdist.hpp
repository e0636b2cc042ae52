#pragma once

#include <span>
#include <vector>

namespace qrrn {

/// Uniform mixture of N Diracs at `atoms()`. Atoms are an unordered multiset:
/// learned quantiles may cross, so nothing here assumes sortedness.
class QuantileDist {
public:
    /// Throws BadN when empty or when an atom is not finite.
    explicit QuantileDist(std::vector<double> atoms);
    QuantileDist(std::initializer_list<double> atoms) : QuantileDist(std::vector<double>(atoms)) {}

    std::span<const double> atoms() const noexcept { return atoms_; }
    int size() const noexcept { return static_cast<int>(atoms_.size()); }
    std::vector<double> sorted() const;

    friend bool operator==(const QuantileDist&, const QuantileDist&) = default;

private:
    std::vector<double> atoms_;
};

/// Quantile midpoints (2i - 1) / (2N), i = 1..N. Throws BadN for N < 1.
std::vector<double> midpoints(int n);

double mean(const QuantileDist& d);
/// Population variance (divisor N).
double variance(const QuantileDist& d);
/// Raw second moment (1/N) sum theta_i^2.
double second_moment(const QuantileDist& d);

/// Mean of the ceil(alpha N) smallest atoms. Throws BadAlpha unless alpha in (0, 1].
double cvar(const QuantileDist& d, double alpha);

/// Huber loss L_kappa(u).
double huber(double u, double kappa);

/// Quantile Huber loss |tau - [u < 0]| * L_kappa(u) / kappa.
double quantile_huber(double u, double tau, double kappa);

/// d/du of quantile_huber; 0 at u = 0.
double quantile_huber_grad(double u, double tau, double kappa);

/// Integrated CDF F2(z) = E[(z - X)+] of the mixture.
double integrated_cdf(const QuantileDist& d, double z);

/// Second-order stochastic dominance a >=_(2) b: F2_a(z) <= F2_b(z) + eps for
/// every z, with eps = 1e-9 * max(1, largest |atom|). F2 is piecewise linear
/// with kinks at the atoms and slope 1 beyond the largest one, so checking
/// the union of both atom sets is exact. The sizes of a and b may differ.
bool ssd_dominates(const QuantileDist& a, const QuantileDist& b);

}  // namespace qrrn
