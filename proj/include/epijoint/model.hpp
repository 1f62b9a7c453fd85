#pragma once

#include "epijoint/types.hpp"

#include <string>
#include <vector>

namespace epijoint {

// Discretized serial interval: weights[s-1] is the probability that the delay
// between a primary and a secondary infection falls in (s-1, s] days.
struct SerialInterval {
    std::vector<double> weights;
    double mean_days = 0.0;
    double std_days = 0.0;

    int truncation() const noexcept { return static_cast<int>(weights.size()); }
    // phi(s) for lag s in 1..truncation().
    double operator()(int lag) const { return weights.at(static_cast<std::size_t>(lag - 1)); }
};

// Daily counts per territory. Stored as reals: scaled-Poisson draws and
// smoothed series are not integers.
struct CountMatrix {
    Matrix counts;
    std::vector<std::string> territory_ids;
    std::vector<std::string> dates;

    Eigen::Index territories() const noexcept { return counts.rows(); }
    Eigen::Index days() const noexcept { return counts.cols(); }

    // Throws DimensionError / ParameterError on inconsistent labels or negative counts.
    void validate() const;
};

// phi_z(c, t): serial-interval weighted sum of counts strictly before t.
using Infectiousness = Matrix;

struct ScaleParams {
    Vector gamma;
    Vector omega;

    void validate() const;
};

// COVID-19 defaults.
inline constexpr double kSerialMeanDays = 6.6;
inline constexpr double kSerialStdDays = 3.5;
inline constexpr int kSerialTruncation = 25;

// Gamma(k = (mean/std)^2, theta = std^2/mean) mass on unit intervals (s-1, s],
// s = 1..truncation, renormalized to sum to one.
SerialInterval serial_interval_weights(double mean_days, double std_days, int truncation);

inline SerialInterval covid_serial_interval()
{
    return serial_interval_weights(kSerialMeanDays, kSerialStdDays, kSerialTruncation);
}

// phi_z(c, t) = sum_{s=1}^{min(t, tau)} phi(s) z(c, t - s).
Infectiousness infectiousness(const Matrix& z, const SerialInterval& phi);

// Same, with `history` holding the counts of the days immediately preceding
// column 0 (last history column is day -1). Lags reaching past the history
// contribute zero.
Infectiousness infectiousness(const Matrix& z, const SerialInterval& phi, const Matrix& history);

// Kullback-Leibler divergence between a count z and a Poisson mean p:
// z ln(z/p) + p - z for z, p > 0; p for z = 0, p >= 0; +inf otherwise.
double kl_term(double z, double p) noexcept;

// What to do with cells where phi_z = 0 while z > 0 (no infection pressure
// can explain the observed count).
enum class UnobservedCells {
    propagate, // contribute +inf, as the divergence prescribes
    exclude,   // drop the cell from the sum
};

// sum_c omega_c sum_t kl_term(z(c,t), r(c,t) phi_z(c,t)).
double data_fidelity(const Matrix& z, const ReproMatrix& r, const Infectiousness& phi_z,
                     const Vector& omega, UnobservedCells policy = UnobservedCells::propagate);

// Cells with phi_z == 0 and z > 0.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
unobserved_mask(const Matrix& z, const Infectiousness& phi_z);

} // namespace epijoint

namespace epijoint {

// z / phi_z elementwise with 0/0 -> 0 and x/0 -> 0.
ReproMatrix safe_ratio(const Matrix& z, const Infectiousness& phi_z);

} // namespace epijoint
