#pragma once

#include "epijoint/laplacian.hpp"
#include "epijoint/types.hpp"

namespace epijoint {

// Mean relative squared error (1/CT) sum ((R_hat - R*) / R*)^2.
double mrse(const ReproMatrix& r_hat, const ReproMatrix& r_star);

// ||L_hat - L*||_F^2 / ||L*||_F^2.
double laplacian_recovery_error(const Matrix& l_hat, const Matrix& l_star);

struct SupportRecovery {
    bool exact = false;
    int false_positives = 0;
    int false_negatives = 0;
};

// Compares the off-diagonal support {|L_hat| > threshold} with the nonzero
// off-diagonal entries of L*.
SupportRecovery support_recovery(const Matrix& l_hat, const Matrix& l_star, double threshold);

// omega_c = 1 / max(std(Z_c), 1), sample standard deviation over the series.
Vector fidelity_weights(const Matrix& z);

} // namespace epijoint
