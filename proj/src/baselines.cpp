#include "epijoint/baselines.hpp"

#include "epijoint/errors.hpp"

#include <algorithm>

namespace epijoint {

void EpiEstimConfig::validate() const
{
    if (tau < 1 || tau % 2 == 0)
        throw ParameterError("EpiEstim window must be a positive odd number of days");
    if (!(prior_shape > 0.0) || !(prior_scale > 0.0))
        throw ParameterError("EpiEstim prior shape and scale must be positive");
}

ReproMatrix ml_estimate(const Matrix& z, const Infectiousness& phi_z)
{
    return safe_ratio(z, phi_z);
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
ml_undefined_mask(const Infectiousness& phi_z)
{
    return phi_z.array() <= 0.0;
}

ReproMatrix epiestim_estimate(const Matrix& z, const Infectiousness& phi_z,
                              const EpiEstimConfig& cfg)
{
    cfg.validate();
    if (z.rows() != phi_z.rows() || z.cols() != phi_z.cols())
        throw DimensionError("epiestim_estimate: shapes of Z and phi_z disagree");

    ReproMatrix r(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
        for (Eigen::Index t = 0; t < z.cols(); ++t) {
            double sum_z = 0.0;
            double sum_phi = 0.0;
            for (Eigen::Index s = std::max<Eigen::Index>(0, t - cfg.tau + 1); s <= t; ++s) {
                sum_z += z(c, s);
                sum_phi += phi_z(c, s);
            }
            r(c, t) = (cfg.prior_shape + sum_z) / (1.0 / cfg.prior_scale + sum_phi);
        }
    }
    return r;
}

} // namespace epijoint
