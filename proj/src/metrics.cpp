#include "epijoint/metrics.hpp"

#include "epijoint/errors.hpp"

#include <algorithm>
#include <cmath>

namespace epijoint {

double mrse(const ReproMatrix& r_hat, const ReproMatrix& r_star)
{
    if (r_hat.rows() != r_star.rows() || r_hat.cols() != r_star.cols())
        throw DimensionError("mrse: shapes disagree");
    if (r_star.size() == 0)
        throw DimensionError("mrse: empty input");
    if ((r_star.array() <= 0.0).any())
        throw ParameterError("mrse: ground truth must be positive everywhere");
    return ((r_hat - r_star).array() / r_star.array()).square().mean();
}

double laplacian_recovery_error(const Matrix& l_hat, const Matrix& l_star)
{
    if (l_hat.rows() != l_star.rows() || l_hat.cols() != l_star.cols())
        throw DimensionError("laplacian_recovery_error: shapes disagree");
    const double denom = l_star.squaredNorm();
    if (!(denom > 0.0))
        throw ParameterError("laplacian_recovery_error: reference Laplacian is zero");
    return (l_hat - l_star).squaredNorm() / denom;
}

SupportRecovery support_recovery(const Matrix& l_hat, const Matrix& l_star, double threshold)
{
    if (!(threshold > 0.0))
        throw ParameterError("support threshold must be positive");
    if (l_hat.rows() != l_star.rows() || l_hat.cols() != l_star.cols())
        throw DimensionError("support_recovery: shapes disagree");
    SupportRecovery out;
    for (Eigen::Index i = 0; i < l_hat.rows(); ++i)
        for (Eigen::Index j = i + 1; j < l_hat.cols(); ++j) {
            const bool found = std::abs(l_hat(i, j)) > threshold;
            const bool truth = l_star(i, j) != 0.0;
            out.false_positives += found && !truth;
            out.false_negatives += !found && truth;
        }
    out.exact = out.false_positives == 0 && out.false_negatives == 0;
    return out;
}

Vector fidelity_weights(const Matrix& z)
{
    const Eigen::Index n = z.cols();
    Vector omega(z.rows());
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
        double sd = 0.0;
        if (n > 1) {
            const double mean = z.row(c).mean();
            sd = std::sqrt((z.row(c).array() - mean).square().sum() / static_cast<double>(n - 1));
        }
        omega[c] = 1.0 / std::max(sd, 1.0);
    }
    return omega;
}

} // namespace epijoint
