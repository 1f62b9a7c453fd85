#pragma once

#include "epijoint/model.hpp"
#include "epijoint/types.hpp"

namespace epijoint {

struct EpiEstimConfig {
    int tau = 7;             // trailing window length (days), odd
    double prior_shape = 1.; // gamma prior shape a
    double prior_scale = 5.; // gamma prior scale b

    void validate() const;
};

// Z / Phi, with 0 wherever Phi = 0.
ReproMatrix ml_estimate(const Matrix& z, const Infectiousness& phi_z);

// Cells where ml_estimate had no infection pressure to divide by.
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
ml_undefined_mask(const Infectiousness& phi_z);

// Gamma posterior mean over a trailing window of tau days, truncated at the
// series start:
//   (a + sum Z) / (1/b + sum Phi).
ReproMatrix epiestim_estimate(const Matrix& z, const Infectiousness& phi_z,
                              const EpiEstimConfig& cfg = {});

} // namespace epijoint
