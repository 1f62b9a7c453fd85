#pragma once

#include "epijoint/laplacian.hpp"
#include "epijoint/model.hpp"
#include "epijoint/proximal.hpp"

#include <vector>

namespace epijoint {

struct JointConfig {
    double lambda_t = 1.0;
    double lambda_s = 1.0;
    double lambda_l = 1.0;
    int n_max = 10;
    // Tolerance and budget of the inner R-step; its lambdas are overwritten.
    PdConfig inner;

    void validate() const;
    PdConfig r_step() const;
};

enum class HalfStep { init, r_step, l_step };

struct JointResult {
    ReproMatrix r_hat;
    GraphLaplacian l_hat;
    // Joint objective after the initial L-step and after every half-step.
    std::vector<double> objective_trace;
    std::vector<HalfStep> trace_kind;
    std::vector<int> inner_iterations;
    std::vector<bool> inner_converged;
    std::vector<int> qp_newton_steps;
    // Constraint violations of every Laplacian iterate L^(0..n_max).
    std::vector<GraphLaplacian::Violations> laplacian_violations;
};

class JointSolveError : public SolverError {
public:
    JointSolveError(const std::string& what, JointResult partial)
        : SolverError(what), partial_(std::move(partial))
    {
    }
    const JointResult& partial() const noexcept { return partial_; }

private:
    JointResult partial_;
};

// Data fidelity + lambda_t sum_c |D2 R_c|_1 + lambda_s sum_t R_t^T L R_t
// + lambda_l ||L||_F^2. Cells with no infection pressure but a positive
// count are excluded, as in the R-step.
double joint_objective(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                       const ReproMatrix& r, const Matrix& l, double lambda_t, double lambda_s,
                       double lambda_l);

// Alternating minimization over R and L, starting from r_init.
JointResult estimate_joint(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                           const JointConfig& cfg, const ReproMatrix& r_init);

// Fixed-graph estimate. A zero matrix selects the temporal-only variant with
// no spatial block.
FixLResult estimate_fix_L(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                          const Matrix& l, const PdConfig& cfg, const ReproMatrix& r_init);

// Default warm start of both estimators: countrywise EpiEstim with a 7-day window.
ReproMatrix joint_warm_start(const Matrix& z, const Infectiousness& phi_z);

} // namespace epijoint
