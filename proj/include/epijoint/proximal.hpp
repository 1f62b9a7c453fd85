#pragma once

#include "epijoint/model.hpp"
#include "epijoint/types.hpp"

#include <optional>
#include <vector>

namespace epijoint {

// C x C matrix with b_tilde^T b_tilde equal to a graph Laplacian. An empty
// (0 x 0) factor disables the spatial block of K altogether.
struct FactorMatrix {
    Matrix b_tilde;

    bool empty() const noexcept { return b_tilde.size() == 0; }
};

// Dual variables of the primal-dual scheme: q_t is the image of the second
// difference applied to each row (C x (T-2)), q_s the image of b_tilde
// applied to each column (C x T, or 0 x T when the spatial block is off).
struct DualVars {
    Matrix q_t;
    Matrix q_s;

    double squared_norm() const { return q_t.squaredNorm() + q_s.squaredNorm(); }
};

struct PdConfig {
    double lambda_t = 1.0;
    double lambda_s = 1.0;
    double epsilon = 1e-7;
    int k_max = 50000;
    // Ratio sigma / tau of the dual and primal steps, with
    // sigma * tau * ||K||^2 = 0.99^2. Zero selects
    // 1e4 max(lambda_t, 1) sqrt(max(lambda_s, 1)).
    double step_ratio = 0.0;
    // Keep the stopping residual of every iteration in FixLResult::residuals.
    bool record_residuals = false;

    void validate() const;
};

// K R = (D2 R_{c,:} for every c, b_tilde R_{:,t} for every t).
DualVars apply_K(const ReproMatrix& r, const FactorMatrix& b_tilde);

// Exact adjoint of apply_K.
ReproMatrix adjoint_K(const DualVars& q, const FactorMatrix& b_tilde, Eigen::Index n_days);

// prox of r -> step * omega * kl_term(z, r * phi) evaluated at x.
double prox_kl(double x, double step, double omega, double phi, double z) noexcept;

// Componentwise soft thresholding.
double prox_l1(double x, double threshold) noexcept;
Matrix prox_l1(const Matrix& x, double threshold);

// prox of p -> step_lambda * ||p||^2, i.e. x / (1 + 2 step_lambda).
Matrix prox_sq_l2(const Matrix& x, double step_lambda);

// Upper estimate of the operator norm of K for T days, from power iteration on
// K^T K (relative tolerance 1e-6) times a 1.01 safety factor.
double operator_norm_K(const FactorMatrix& b_tilde, Eigen::Index n_days);

// Objective of the fixed-graph problem. Cells with phi_z = 0
// and z > 0 are excluded from the fidelity sum.
double fix_L_objective(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                       const ReproMatrix& r, const FactorMatrix& b_tilde, double lambda_t,
                       double lambda_s);

struct FixLResult {
    ReproMatrix r;
    DualVars q;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
    std::vector<double> residuals;
};

// R = Z / Phi (0 where Phi = 0) and Q = K R.
std::pair<ReproMatrix, DualVars> default_start(const Matrix& z, const Infectiousness& phi_z,
                                               const FactorMatrix& b_tilde);

// Chambolle-Pock iterations for
//   min_{R >= 0} sum_c omega_c KL(Z_c | R_c * Phi_c) + lambda_t sum_c |D2 R_c|_1
//                + lambda_s sum_t |b_tilde R_t|^2
// started from (warm_r, warm_q). Stops when the relative primal and dual
// increments both fall below cfg.epsilon or after cfg.k_max iterations; in the
// latter case `converged` is false. Never returns an objective above the
// starting point's.
FixLResult solve_fix_L(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                       const FactorMatrix& b_tilde, const PdConfig& cfg, const ReproMatrix& warm_r,
                       const std::optional<DualVars>& warm_q = std::nullopt);

} // namespace epijoint
