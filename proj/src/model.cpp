#include "epijoint/model.hpp"

#include "epijoint/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numeric>

namespace epijoint {

void CountMatrix::validate() const
{
    if (static_cast<Eigen::Index>(territory_ids.size()) != counts.rows())
        throw DimensionError("count matrix has " + std::to_string(counts.rows()) + " rows but "
                             + std::to_string(territory_ids.size()) + " territory labels");
    if (static_cast<Eigen::Index>(dates.size()) != counts.cols())
        throw DimensionError("count matrix has " + std::to_string(counts.cols()) + " columns but "
                             + std::to_string(dates.size()) + " dates");
    if ((counts.array() < 0.0).any() || !counts.allFinite())
        throw ParameterError("counts must be finite and nonnegative");
}

void ScaleParams::validate() const
{
    if (gamma.size() != omega.size())
        throw DimensionError("gamma and omega sizes differ");
    if ((gamma.array() <= 0.0).any() || (omega.array() <= 0.0).any())
        throw ParameterError("scale parameters and fidelity weights must be positive");
}

SerialInterval serial_interval_weights(double mean_days, double std_days, int truncation)
{
    if (!(mean_days > 0.0) || !(std_days > 0.0))
        throw ParameterError("serial interval mean and standard deviation must be positive");
    if (truncation < 1)
        throw ParameterError("serial interval truncation must be at least one day");

    const double shape = (mean_days / std_days) * (mean_days / std_days);
    const double scale = std_days * std_days / mean_days;

    SerialInterval si;
    si.mean_days = mean_days;
    si.std_days = std_days;
    si.weights.resize(static_cast<std::size_t>(truncation));

    double lower = 0.0;
    for (int s = 1; s <= truncation; ++s) {
        const double upper = boost::math::gamma_p(shape, s / scale);
        si.weights[static_cast<std::size_t>(s - 1)] = upper - lower;
        lower = upper;
    }
    const double total = std::accumulate(si.weights.begin(), si.weights.end(), 0.0);
    if (!(total > 0.0))
        throw ParameterError("serial interval has no mass within the truncation window");
    for (double& w : si.weights)
        w /= total;
    return si;
}

Infectiousness infectiousness(const Matrix& z, const SerialInterval& phi)
{
    return infectiousness(z, phi, Matrix(z.rows(), 0));
}

Infectiousness infectiousness(const Matrix& z, const SerialInterval& phi, const Matrix& history)
{
    if (history.rows() != z.rows())
        throw DimensionError("history and counts must have the same number of territories");
    const Eigen::Index n_days = z.cols();
    const Eigen::Index n_hist = history.cols();
    const int tau = phi.truncation();

    Infectiousness out = Infectiousness::Zero(z.rows(), n_days);
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
        for (Eigen::Index t = 0; t < n_days; ++t) {
            double acc = 0.0;
            for (int s = 1; s <= tau; ++s) {
                const Eigen::Index src = t - s;
                if (src >= 0)
                    acc += phi(s) * z(c, src);
                else if (src >= -n_hist)
                    acc += phi(s) * history(c, n_hist + src);
            }
            out(c, t) = acc;
        }
    }
    return out;
}

double kl_term(double z, double p) noexcept
{
    if (z > 0.0 && p > 0.0)
        return z * std::log(z / p) + p - z;
    if (z == 0.0 && p >= 0.0)
        return p;
    return std::numeric_limits<double>::infinity();
}

double data_fidelity(const Matrix& z, const ReproMatrix& r, const Infectiousness& phi_z,
                     const Vector& omega, UnobservedCells policy)
{
    if (z.rows() != r.rows() || z.cols() != r.cols() || z.rows() != phi_z.rows()
        || z.cols() != phi_z.cols() || omega.size() != z.rows())
        throw DimensionError("data_fidelity: shapes of Z, R, phi_z and omega disagree");

    double total = 0.0;
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
        double row = 0.0;
        for (Eigen::Index t = 0; t < z.cols(); ++t) {
            if (policy == UnobservedCells::exclude && phi_z(c, t) == 0.0 && z(c, t) > 0.0)
                continue;
            row += kl_term(z(c, t), r(c, t) * phi_z(c, t));
        }
        total += omega[c] * row;
    }
    return total;
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
unobserved_mask(const Matrix& z, const Infectiousness& phi_z)
{
    return (phi_z.array() == 0.0) && (z.array() > 0.0);
}

} // namespace epijoint

namespace epijoint {

ReproMatrix safe_ratio(const Matrix& z, const Infectiousness& phi_z)
{
    if (z.rows() != phi_z.rows() || z.cols() != phi_z.cols())
        throw DimensionError("safe_ratio: shapes of Z and phi_z disagree");
    return (phi_z.array() > 0.0).select(z.array() / phi_z.array(), 0.0).matrix();
}

} // namespace epijoint
