#include "epijoint/joint.hpp"

#include "epijoint/baselines.hpp"

namespace epijoint {

void JointConfig::validate() const
{
    if (!(lambda_t > 0.0) || !(lambda_s > 0.0) || !(lambda_l > 0.0))
        throw ParameterError("joint hyperparameters must be positive");
    if (n_max < 1)
        throw ParameterError("n_max must be at least 1");
}

PdConfig JointConfig::r_step() const
{
    PdConfig pd = inner;
    pd.lambda_t = lambda_t;
    pd.lambda_s = lambda_s;
    return pd;
}

double joint_objective(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                       const ReproMatrix& r, const Matrix& l, double lambda_t, double lambda_s,
                       double lambda_l)
{
    if (l.rows() != r.rows() || l.cols() != r.rows())
        throw DimensionError("Laplacian must be C x C");
    if (r.cols() < 3)
        throw DimensionError("the second-order difference needs at least three days");
    const Eigen::Index n = r.cols() - 2;
    const double temporal =
        (r.leftCols(n) - 2.0 * r.middleCols(1, n) + r.rightCols(n)).cwiseAbs().sum();
    // sum_t R_t^T L R_t = <L, R R^T>
    const double spatial = (l.cwiseProduct(r * r.transpose())).sum();
    return data_fidelity(z, r, phi_z, omega, UnobservedCells::exclude) + lambda_t * temporal
           + lambda_s * spatial + lambda_l * l.squaredNorm();
}

JointResult estimate_joint(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                           const JointConfig& cfg, const ReproMatrix& r_init)
{
    cfg.validate();
    if (r_init.rows() != z.rows() || r_init.cols() != z.cols())
        throw DimensionError("initial R must have the shape of Z");
    if ((r_init.array() < 0.0).any())
        throw ParameterError("initial R must be nonnegative");

    const PdConfig pd = cfg.r_step();
    JointResult out;
    auto record = [&](const ReproMatrix& r, const GraphLaplacian& l, HalfStep kind) {
        out.objective_trace.push_back(joint_objective(z, phi_z, omega, r, l.l, cfg.lambda_t,
                                                      cfg.lambda_s, cfg.lambda_l));
        out.trace_kind.push_back(kind);
    };
    auto fail = [&](const std::string& where, const std::exception& e) -> JointSolveError {
        return JointSolveError(where + ": " + e.what(), out);
    };

    ReproMatrix r = r_init;
    LaplacianSolution lap;
    try {
        lap = solve_laplacian_qp(gram(r), cfg.lambda_s, cfg.lambda_l);
    } catch (const Error& e) {
        throw fail("initial Laplacian step", e);
    }
    out.qp_newton_steps.push_back(lap.stats.newton_steps);
    out.laplacian_violations.push_back(lap.laplacian.violations());
    record(r, lap.laplacian, HalfStep::init);

    FactorMatrix factor = cholesky_factor(lap.laplacian);
    DualVars q = apply_K(r, factor);

    for (int n = 0; n < cfg.n_max; ++n) {
        FixLResult step;
        try {
            step = solve_fix_L(z, phi_z, omega, factor, pd, r, q);
        } catch (const Error& e) {
            throw fail("R-step " + std::to_string(n + 1), e);
        }
        r = std::move(step.r);
        q = std::move(step.q);
        out.inner_iterations.push_back(step.iterations);
        out.inner_converged.push_back(step.converged);
        record(r, lap.laplacian, HalfStep::r_step);

        try {
            lap = solve_laplacian_qp(gram(r), cfg.lambda_s, cfg.lambda_l, lap.state);
            factor = cholesky_factor(lap.laplacian);
        } catch (const Error& e) {
            throw fail("L-step " + std::to_string(n + 1), e);
        }
        out.qp_newton_steps.push_back(lap.stats.newton_steps);
        out.laplacian_violations.push_back(lap.laplacian.violations());
        record(r, lap.laplacian, HalfStep::l_step);
    }

    out.r_hat = std::move(r);
    out.l_hat = std::move(lap.laplacian);
    return out;
}

FixLResult estimate_fix_L(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                          const Matrix& l, const PdConfig& cfg, const ReproMatrix& r_init)
{
    FactorMatrix factor;
    if (!l.isZero(0.0)) {
        GraphLaplacian lap{l};
        if (!lap.admissible())
            throw ParameterError("fixed graph must be an admissible Laplacian or zero");
        factor = cholesky_factor(lap);
    }
    return solve_fix_L(z, phi_z, omega, factor, cfg, r_init);
}

ReproMatrix joint_warm_start(const Matrix& z, const Infectiousness& phi_z)
{
    EpiEstimConfig cfg;
    cfg.tau = 7;
    return epiestim_estimate(z, phi_z, cfg);
}

} // namespace epijoint
