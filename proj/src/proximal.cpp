#include "epijoint/proximal.hpp"

#include "epijoint/errors.hpp"
#include "epijoint/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epijoint {

namespace {

void second_difference(const ReproMatrix& r, Matrix& out)
{
    const Eigen::Index n = r.cols() - 2;
    out.noalias() = r.leftCols(n) - 2.0 * r.middleCols(1, n) + r.rightCols(n);
}

void add_second_difference_adjoint(const Matrix& q, ReproMatrix& out)
{
    const Eigen::Index n = q.cols();
    out.leftCols(n) += q;
    out.middleCols(1, n) -= 2.0 * q;
    out.rightCols(n) += q;
}

void check_shapes(const ReproMatrix& r, const FactorMatrix& b)
{
    if (r.cols() < 3)
        throw DimensionError("the second-order difference needs at least three days");
    if (!b.empty() && (b.b_tilde.rows() != r.rows() || b.b_tilde.cols() != r.rows()))
        throw DimensionError("factor matrix must be C x C");
}

} // namespace

void PdConfig::validate() const
{
    if (!(lambda_t > 0.0))
        throw ParameterError("lambda_t must be positive");
    if (!(lambda_s >= 0.0))
        throw ParameterError("lambda_s must be nonnegative");
    if (!(epsilon > 0.0))
        throw ParameterError("epsilon must be positive");
    if (k_max < 1)
        throw ParameterError("k_max must be at least 1");
    if (!(step_ratio >= 0.0))
        throw ParameterError("step ratio must be nonnegative");
}

DualVars apply_K(const ReproMatrix& r, const FactorMatrix& b_tilde)
{
    check_shapes(r, b_tilde);
    DualVars q;
    second_difference(r, q.q_t);
    if (b_tilde.empty())
        q.q_s.resize(0, r.cols());
    else
        q.q_s.noalias() = b_tilde.b_tilde * r;
    return q;
}

ReproMatrix adjoint_K(const DualVars& q, const FactorMatrix& b_tilde, Eigen::Index n_days)
{
    if (q.q_t.cols() != n_days - 2)
        throw DimensionError("temporal dual must have T - 2 columns");
    ReproMatrix out = ReproMatrix::Zero(q.q_t.rows(), n_days);
    add_second_difference_adjoint(q.q_t, out);
    if (!b_tilde.empty()) {
        if (q.q_s.rows() != b_tilde.b_tilde.rows() || q.q_s.cols() != n_days)
            throw DimensionError("spatial dual must be C x T");
        out.noalias() += b_tilde.b_tilde.transpose() * q.q_s;
    }
    return out;
}

double prox_kl(double x, double step, double omega, double phi, double z) noexcept
{
    const double a = step * omega * phi;
    if (phi <= 0.0)
        return std::max(x, 0.0);
    if (z <= 0.0)
        return std::max(x - a, 0.0);
    // Positive root of r^2 + (a - x) r - step * omega * phi * (z / phi) = 0.
    const double b = x - a;
    const double c = step * omega * z;
    const double disc = std::sqrt(b * b + 4.0 * c);
    return b >= 0.0 ? 0.5 * (b + disc) : 2.0 * c / (disc - b);
}

double prox_l1(double x, double threshold) noexcept
{
    const double mag = std::abs(x) - threshold;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

Matrix prox_l1(const Matrix& x, double threshold)
{
    if (!(threshold > 0.0))
        throw ParameterError("soft threshold must be positive");
    return x.unaryExpr([threshold](double v) { return prox_l1(v, threshold); });
}

Matrix prox_sq_l2(const Matrix& x, double step_lambda)
{
    if (!(step_lambda > 0.0))
        throw ParameterError("prox_sq_l2 step must be positive");
    return x / (1.0 + 2.0 * step_lambda);
}

double operator_norm_K(const FactorMatrix& b_tilde, Eigen::Index n_days)
{
    if (n_days < 3)
        throw DimensionError("the second-order difference needs at least three days");
    const Eigen::Index n_terr = b_tilde.empty() ? 1 : b_tilde.b_tilde.rows();

    Rng rng(0x5eedULL);
    ReproMatrix x(n_terr, n_days);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x.data()[i] = rng.uniform(-1.0, 1.0);
    x.normalize();

    double estimate = 0.0;
    for (int it = 0; it < 1000; ++it) {
        const ReproMatrix y = adjoint_K(apply_K(x, b_tilde), b_tilde, n_days);
        const double next = x.cwiseProduct(y).sum(); // Rayleigh quotient of K^T K
        const double ny = y.norm();
        if (ny == 0.0)
            return 0.0;
        x = y / ny;
        if (it > 0 && std::abs(next - estimate) <= 1e-6 * next)
            return 1.01 * std::sqrt(next);
        estimate = next;
    }
    const double b_norm = b_tilde.empty() ? 0.0 : b_tilde.b_tilde.norm();
    return std::sqrt(16.0 + b_norm * b_norm);
}

double fix_L_objective(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                       const ReproMatrix& r, const FactorMatrix& b_tilde, double lambda_t,
                       double lambda_s)
{
    const DualVars kr = apply_K(r, b_tilde);
    double value = data_fidelity(z, r, phi_z, omega, UnobservedCells::exclude);
    value += lambda_t * kr.q_t.cwiseAbs().sum();
    if (!b_tilde.empty())
        value += lambda_s * kr.q_s.squaredNorm();
    return value;
}

std::pair<ReproMatrix, DualVars> default_start(const Matrix& z, const Infectiousness& phi_z,
                                               const FactorMatrix& b_tilde)
{
    ReproMatrix r = safe_ratio(z, phi_z);
    DualVars q = apply_K(r, b_tilde);
    return {std::move(r), std::move(q)};
}

FixLResult solve_fix_L(const Matrix& z, const Infectiousness& phi_z, const Vector& omega,
                       const FactorMatrix& b_tilde, const PdConfig& cfg, const ReproMatrix& warm_r,
                       const std::optional<DualVars>& warm_q)
{
    cfg.validate();
    const Eigen::Index n_terr = z.rows();
    const Eigen::Index n_days = z.cols();
    if (phi_z.rows() != n_terr || phi_z.cols() != n_days || warm_r.rows() != n_terr
        || warm_r.cols() != n_days || omega.size() != n_terr)
        throw DimensionError("solve_fix_L: shapes of Z, phi_z, omega and the warm start disagree");
    check_shapes(warm_r, b_tilde);
    if ((omega.array() <= 0.0).any())
        throw ParameterError("fidelity weights must be positive");

    const bool spatial = !b_tilde.empty();
    const double norm_k = operator_norm_K(b_tilde, n_days);
    const double ratio = cfg.step_ratio > 0.0
        ? cfg.step_ratio
        : 1e4 * std::max(cfg.lambda_t, 1.0) * std::sqrt(std::max(cfg.lambda_s, 1.0));
    const double step = 0.99 / (norm_k * std::sqrt(ratio));
    const double sigma = 0.99 * std::sqrt(ratio) / norm_k;
    const double lt = cfg.lambda_t;
    const double ls_shrink = 2.0 * cfg.lambda_s / (2.0 * cfg.lambda_s + sigma);

    // Per-cell constants of the KL prox, a = step omega phi and b = step omega z.
    // Cells without infection pressure get a = b = 0, which turns the root
    // formula below into max(x, 0); a zero count gives max(x - a, 0).
    Matrix prox_a(n_terr, n_days);
    Matrix prox_b(n_terr, n_days);
    for (Eigen::Index c = 0; c < n_terr; ++c)
        for (Eigen::Index t = 0; t < n_days; ++t) {
            const bool observed = phi_z(c, t) > 0.0;
            prox_a(c, t) = observed ? step * omega[c] * phi_z(c, t) : 0.0;
            prox_b(c, t) = observed ? step * omega[c] * std::max(z(c, t), 0.0) : 0.0;
        }

    FixLResult res;
    ReproMatrix r = warm_r.cwiseMax(0.0);
    DualVars q;
    if (warm_q) {
        q = *warm_q;
        if (q.q_t.rows() != n_terr || q.q_t.cols() != n_days - 2)
            throw DimensionError("warm temporal dual has the wrong shape");
        if (!spatial)
            q.q_s.resize(0, n_days);
        else if (q.q_s.rows() != n_terr || q.q_s.cols() != n_days)
            q.q_s = Matrix::Zero(n_terr, n_days);
    } else {
        q = apply_K(r, b_tilde);
    }
    const DualVars q_start = q;

    ReproMatrix r_bar = r;
    ReproMatrix grad(n_terr, n_days);
    Matrix bq(spatial ? n_terr : 0, n_days);
    const Eigen::Index n_inner = n_days - 2;
    const Eigen::Index n_cells = n_terr * n_days;

    const double start_objective = fix_L_objective(z, phi_z, omega, r, b_tilde, lt, cfg.lambda_s);

    // Primal step first, then the dual step at the extrapolated primal point.
    // The state carried between iterations is (R, Q) alone, so a warm start
    // from a previous output continues the same sequence.
    int k = 0;
    while (k < cfg.k_max) {
        ++k;
        if (spatial)
            grad.noalias() = b_tilde.b_tilde.transpose() * q.q_s;
        else
            grad.setZero();
        for (Eigen::Index c = 0; c < n_terr; ++c) {
            const double* qt = q.q_t.row(c).data();
            double* g = grad.row(c).data();
            if (n_inner < 2) {
                g[0] += qt[0];
                g[1] -= 2.0 * qt[0];
                g[2] += qt[0];
                continue;
            }
            g[0] += qt[0];
            g[1] += qt[1] - 2.0 * qt[0];
#pragma omp simd
            for (Eigen::Index t = 2; t < n_inner; ++t)
                g[t] += qt[t - 2] - 2.0 * qt[t - 1] + qt[t];
            g[n_inner] += qt[n_inner - 2] - 2.0 * qt[n_inner - 1];
            g[n_inner + 1] += qt[n_inner - 1];
        }

        // KL prox: positive root of r^2 + (a - x) r - b = 0, in the
        // cancellation-free form on each side of x = a.
        double dr2 = 0.0;
        double nr2 = 0.0;
        {
            double* rr = r.data();
            double* rb = r_bar.data();
            const double* g = grad.data();
            const double* pa = prox_a.data();
            const double* pb = prox_b.data();
#pragma omp simd reduction(+ : dr2, nr2)
            for (Eigen::Index i = 0; i < n_cells; ++i) {
                const double x = rr[i] - step * g[i] - pa[i];
                const double disc = std::sqrt(x * x + 4.0 * pb[i]);
                const double next = x >= 0.0 ? 0.5 * (x + disc) : 2.0 * pb[i] / (disc - x);
                const double d = next - rr[i];
                dr2 += d * d;
                nr2 += next * next;
                rb[i] = next + d;
                rr[i] = next;
            }
        }

        // Dual ascent followed by the prox of sigma G^* (Moreau identity):
        // the l1 block reduces to a clip to [-lambda_t, lambda_t], the
        // squared-l2 block to a shrink.
        double dq2 = 0.0;
        double nq2 = 0.0;
        for (Eigen::Index c = 0; c < n_terr; ++c) {
            const double* rb = r_bar.row(c).data();
            double* qt = q.q_t.row(c).data();
#pragma omp simd reduction(+ : dq2, nq2)
            for (Eigen::Index j = 0; j < n_inner; ++j) {
                const double moved = qt[j] + sigma * (rb[j] - 2.0 * rb[j + 1] + rb[j + 2]);
                const double clipped = std::min(std::max(moved, -lt), lt);
                const double d = clipped - qt[j];
                dq2 += d * d;
                nq2 += clipped * clipped;
                qt[j] = clipped;
            }
        }
        if (spatial) {
            bq.noalias() = b_tilde.b_tilde * r_bar;
            double* qs = q.q_s.data();
            const double* bqd = bq.data();
#pragma omp simd reduction(+ : dq2, nq2)
            for (Eigen::Index i = 0; i < n_cells; ++i) {
                const double updated = ls_shrink * (qs[i] + sigma * bqd[i]);
                const double d = updated - qs[i];
                dq2 += d * d;
                nq2 += updated * updated;
                qs[i] = updated;
            }
        }

        const double rel_r = nr2 > 0.0 ? std::sqrt(dr2 / nr2) : std::sqrt(dr2);
        const double rel_q = nq2 > 0.0 ? std::sqrt(dq2 / nq2) : std::sqrt(dq2);
        const double residual = std::max(rel_r, rel_q);
        if (cfg.record_residuals)
            res.residuals.push_back(residual);
        if (residual <= cfg.epsilon) {
            res.converged = true;
            break;
        }
    }

    res.iterations = k;
    res.objective = fix_L_objective(z, phi_z, omega, r, b_tilde, lt, cfg.lambda_s);
    if (!(res.objective <= start_objective)) {
        // The iterates never improved on the warm start: return it unchanged.
        res.r = warm_r.cwiseMax(0.0);
        res.q = q_start;
        res.objective = start_objective;
    } else {
        res.r = std::move(r);
        res.q = std::move(q);
    }
    return res;
}

} // namespace epijoint
