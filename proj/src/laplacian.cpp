#include "epijoint/laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epijoint {

GraphLaplacian::Violations GraphLaplacian::violations() const
{
    Violations v;
    const Eigen::Index n = l.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        v.row_sum = std::max(v.row_sum, std::abs(l.row(i).sum()));
        for (Eigen::Index j = 0; j < n; ++j) {
            v.asymmetry = std::max(v.asymmetry, std::abs(l(i, j) - l(j, i)));
            if (i != j)
                v.positive_off_diagonal = std::max(v.positive_off_diagonal, l(i, j));
        }
    }
    v.trace = std::abs(l.trace() - static_cast<double>(n));
    return v;
}

bool GraphLaplacian::Violations::within_tolerance() const
{
    return asymmetry == 0.0 && positive_off_diagonal <= 1e-12 && row_sum <= 1e-9 && trace <= 1e-9;
}

bool GraphLaplacian::admissible() const
{
    if (l.rows() != l.cols() || l.rows() < 2 || !l.allFinite())
        return false;
    return violations().within_tolerance();
}

std::vector<std::pair<int, int>> GraphLaplacian::edges(double threshold) const
{
    std::vector<std::pair<int, int>> out;
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        for (Eigen::Index j = i + 1; j < l.cols(); ++j)
            if (std::abs(l(i, j)) > threshold)
                out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    return out;
}

Matrix laplacian_from_adjacency(const Matrix& adjacency)
{
    if (adjacency.rows() != adjacency.cols())
        throw DimensionError("adjacency matrix must be square");
    const Eigen::Index n = adjacency.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) {
                l(i, j) = -adjacency(i, j);
                l(i, i) += adjacency(i, j);
            }
    return l;
}

SmoothnessGram gram(const ReproMatrix& r)
{
    return r * r.transpose();
}

EdgeParameterization::EdgeParameterization(int n_territories) : n_(n_territories)
{
    if (n_ < 2)
        throw ParameterError("a Laplacian needs at least two territories");
    index_.assign(static_cast<std::size_t>(n_ * n_), -1);
    for (int c = 0; c < n_; ++c)
        for (int cp = c + 1; cp < n_; ++cp) {
            index_[static_cast<std::size_t>(c * n_ + cp)] = static_cast<int>(edges_.size());
            index_[static_cast<std::size_t>(cp * n_ + c)] = static_cast<int>(edges_.size());
            edges_.emplace_back(c, cp);
        }
}

int EdgeParameterization::edge_index(int c, int cp) const
{
    if (c == cp || c < 0 || cp < 0 || c >= n_ || cp >= n_)
        throw ParameterError("not an edge");
    return index_[static_cast<std::size_t>(c * n_ + cp)];
}

Matrix EdgeParameterization::laplacian(const Vector& w) const
{
    if (w.size() != edge_count())
        throw DimensionError("weight vector length must be C(C-1)/2");
    Matrix l = Matrix::Zero(n_, n_);
    for (int e = 0; e < edge_count(); ++e) {
        const auto [c, cp] = edges_[static_cast<std::size_t>(e)];
        l(c, cp) = w[e];
        l(cp, c) = w[e];
        l(c, c) -= w[e];
        l(cp, cp) -= w[e];
    }
    return l;
}

Vector EdgeParameterization::weights(const Matrix& l) const
{
    if (l.rows() != n_ || l.cols() != n_)
        throw DimensionError("Laplacian must be C x C");
    Vector w(edge_count());
    for (int e = 0; e < edge_count(); ++e) {
        const auto [c, cp] = edges_[static_cast<std::size_t>(e)];
        w[e] = l(c, cp);
    }
    return w;
}

Matrix EdgeParameterization::hessian(double lambda_l) const
{
    const int m = edge_count();
    Matrix h = Matrix::Zero(m, m);
    for (int e = 0; e < m; ++e) {
        const auto [a, b] = edges_[static_cast<std::size_t>(e)];
        for (int f = 0; f < m; ++f) {
            const auto [c, d] = edges_[static_cast<std::size_t>(f)];
            const int shared = (a == c) + (a == d) + (b == c) + (b == d);
            h(e, f) = 2.0 * lambda_l * (shared + (e == f ? 2.0 : 0.0));
        }
    }
    return h;
}

Vector EdgeParameterization::linear(const SmoothnessGram& g, double lambda_s) const
{
    if (g.rows() != n_ || g.cols() != n_)
        throw DimensionError("Gram matrix must be C x C");
    Vector q(edge_count());
    for (int e = 0; e < edge_count(); ++e) {
        const auto [c, cp] = edges_[static_cast<std::size_t>(e)];
        q[e] = lambda_s * (g(c, cp) + g(cp, c) - g(c, c) - g(cp, cp));
    }
    return q;
}

double laplacian_qp_objective(const Matrix& l, const SmoothnessGram& g, double lambda_s,
                              double lambda_l)
{
    return lambda_l * l.squaredNorm() + lambda_s * l.cwiseProduct(g).sum();
}

namespace {

// min 0.5 v^T H v + q^T v  s.t.  1^T v = b, v >= 0, with v = -w the edge
// weights. Multipliers: y for the equality, s >= 0 for the bounds, so the
// stationarity residual is H v + q - y 1 - s.
struct Iterate {
    Vector v;
    double y = 0.0;
    Vector s;
};

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

Residuals residuals(const Matrix& h, const Vector& q, double b, const Iterate& it)
{
    Residuals r;
    r.primal = std::abs(it.v.sum() - b);
    r.dual = (h * it.v + q - Vector::Constant(it.v.size(), it.y) - it.s).cwiseAbs().maxCoeff();
    r.gap = it.v.dot(it.s);
    return r;
}

constexpr double kFeasTol = 1e-10;
constexpr double kGapTol = 1e-10;
constexpr int kMaxNewton = 200;

bool converged(const Residuals& r, double b)
{
    return r.primal <= kFeasTol * (1.0 + b) && r.dual <= kFeasTol && r.gap <= kGapTol;
}

double step_to_boundary(const Vector& x, const Vector& dx)
{
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (dx[i] < 0.0)
            alpha = std::min(alpha, -x[i] / dx[i]);
    return alpha;
}

// Mehrotra predictor-corrector. Returns the number of Newton steps taken, or
// -1 when the iteration budget ran out or the Newton matrix lost definiteness.
int interior_point(const Matrix& h, const Vector& q, double b, Iterate& it)
{
    const Eigen::Index n = q.size();
    const Vector ones = Vector::Ones(n);
    for (int k = 0; k < kMaxNewton; ++k) {
        const Residuals res = residuals(h, q, b, it);
        if (converged(res, b))
            return k;

        const Vector r_dual = h * it.v + q - it.y * ones - it.s;
        const double r_primal = it.v.sum() - b;
        const double mu = it.v.dot(it.s) / static_cast<double>(n);

        Matrix m = h;
        m.diagonal() += it.s.cwiseQuotient(it.v);
        const Eigen::LLT<Matrix> llt(m);
        if (llt.info() != Eigen::Success)
            return -1;
        const Vector m_inv_ones = llt.solve(ones);
        const double denom = ones.dot(m_inv_ones);

        auto newton = [&](const Vector& r_comp, Vector& dv, double& dy, Vector& ds) {
            const Vector u = llt.solve(-r_dual - r_comp.cwiseQuotient(it.v));
            dy = (-r_primal - ones.dot(u)) / denom;
            dv = u + dy * m_inv_ones;
            ds = (-r_comp - it.s.cwiseProduct(dv)).cwiseQuotient(it.v);
        };

        Vector dv, ds;
        double dy = 0.0;
        const Vector comp = it.v.cwiseProduct(it.s);
        newton(comp, dv, dy, ds);
        const double alpha_aff = std::min(step_to_boundary(it.v, dv), step_to_boundary(it.s, ds));
        const double mu_aff = (it.v + alpha_aff * dv).dot(it.s + alpha_aff * ds)
                              / static_cast<double>(n);
        const double centering = std::pow(mu_aff / mu, 3);

        const Vector corrected = comp + dv.cwiseProduct(ds)
                                 - Vector::Constant(n, centering * mu);
        newton(corrected, dv, dy, ds);
        const double alpha =
            std::min(1.0, 0.995 * std::min(step_to_boundary(it.v, dv), step_to_boundary(it.s, ds)));
        it.v += alpha * dv;
        it.y += alpha * dy;
        it.s += alpha * ds;
        if (!it.v.allFinite() || !it.s.allFinite())
            return -1;
    }
    return converged(residuals(h, q, b, it), b) ? kMaxNewton : -1;
}

// Solve the equality-constrained problem on the edges the interior point
// leaves strictly positive; accept it when it satisfies the full KKT system.
bool polish(const Matrix& h, const Vector& q, double b, Iterate& it)
{
    const Eigen::Index n = q.size();
    std::vector<Eigen::Index> free_set, active_set;
    for (Eigen::Index e = 0; e < n; ++e)
        (it.v[e] > it.s[e] ? free_set : active_set).push_back(e);
    if (free_set.empty())
        return false;

    const auto nf = static_cast<Eigen::Index>(free_set.size());
    Matrix hf(nf, nf);
    Vector qf(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        qf[i] = q[free_set[i]];
        for (Eigen::Index j = 0; j < nf; ++j)
            hf(i, j) = h(free_set[i], free_set[j]);
    }
    const Eigen::LLT<Matrix> llt(hf);
    if (llt.info() != Eigen::Success)
        return false;
    const Vector ones = Vector::Ones(nf);
    const Vector h_inv_ones = llt.solve(ones);
    const Vector h_inv_q = llt.solve(qf);
    const double y = (b + ones.dot(h_inv_q)) / ones.dot(h_inv_ones);
    const Vector vf = y * h_inv_ones - h_inv_q;
    if ((vf.array() <= 0.0).any())
        return false;

    Iterate cand;
    cand.v = Vector::Zero(n);
    for (Eigen::Index i = 0; i < nf; ++i)
        cand.v[free_set[i]] = vf[i];
    cand.y = y;
    cand.s = h * cand.v + q - Vector::Constant(n, y);
    for (Eigen::Index e : free_set)
        cand.s[e] = 0.0;
    for (Eigen::Index e : active_set)
        if (cand.s[e] < -kFeasTol)
            return false;
    cand.s = cand.s.cwiseMax(0.0);
    it = std::move(cand);
    return true;
}

Iterate cold_start(const Matrix& h, const Vector& q, double b)
{
    const Eigen::Index n = q.size();
    Iterate it;
    it.v = Vector::Constant(n, b / static_cast<double>(n));
    const Vector grad = h * it.v + q;
    it.y = grad.minCoeff() - 1.0;
    it.s = grad - Vector::Constant(n, it.y);
    return it;
}

} // namespace

LaplacianSolution solve_laplacian_qp(const SmoothnessGram& g, double lambda_s, double lambda_l,
                                     const std::optional<QpWarmStart>& warm)
{
    if (!(lambda_s >= 0.0))
        throw ParameterError("lambda_s must be nonnegative");
    if (!(lambda_l > 0.0))
        throw ParameterError("lambda_l must be positive for a strictly convex problem");
    if (g.rows() != g.cols())
        throw DimensionError("Gram matrix must be square");
    if (!g.allFinite())
        throw ParameterError("Gram matrix must be finite");
    const EdgeParameterization param(static_cast<int>(g.rows()));
    const Eigen::Index n = param.edge_count();
    const double b = -param.weight_sum();

    // Work in v = -w with the objective scaled to max |H|, |q| <= 1.
    Matrix h = param.hessian(lambda_l);
    Vector q = -param.linear(g, lambda_s);
    const double scale = std::max(h.cwiseAbs().maxCoeff(), q.cwiseAbs().maxCoeff());
    h /= scale;
    q /= scale;

    QpStats stats;
    Iterate it;
    int steps = -1;
    if (warm && warm->weights.size() == n && warm->bounds.size() == n) {
        constexpr double delta = 1e-8;
        it.v = (-warm->weights).cwiseMax(delta);
        it.y = warm->equality / scale;
        it.s = (warm->bounds / scale).cwiseMax(delta);
        stats.warm_started = true;
        steps = interior_point(h, q, b, it);
        stats.newton_steps = std::max(steps, 0);
    }
    if (steps < 0) {
        it = cold_start(h, q, b);
        steps = interior_point(h, q, b, it);
        stats.newton_steps += std::max(steps, 0);
    }

    const auto to_warm = [&](const Iterate& x) {
        QpWarmStart st;
        st.weights = -x.v;
        st.equality = x.y * scale;
        st.bounds = x.s * scale;
        return st;
    };

    Residuals res = residuals(h, q, b, it);
    if (steps < 0) {
        stats.primal_residual = res.primal;
        stats.dual_residual = res.dual;
        stats.complementarity = res.gap;
        throw QpSolveError("Laplacian QP interior point did not converge", to_warm(it), stats);
    }

    stats.polished = polish(h, q, b, it);
    // Exact trace: spread the (round-off) equality defect proportionally.
    it.v *= b / it.v.sum();
    res = residuals(h, q, b, it);
    stats.primal_residual = res.primal;
    stats.dual_residual = res.dual;
    stats.complementarity = res.gap;

    LaplacianSolution sol;
    sol.laplacian.l = param.laplacian(-it.v);
    sol.state = to_warm(it);
    sol.stats = stats;
    return sol;
}

FactorMatrix cholesky_factor(const GraphLaplacian& l)
{
    const Eigen::Index n = l.size();
    if (n == 0 || l.l.cols() != n)
        throw DimensionError("Laplacian must be square and non-empty");
    const double jitter = 1e-12 * l.l.trace() / static_cast<double>(n);
    Matrix shifted = l.l;
    shifted.diagonal().array() += jitter;
    const Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success)
        throw SolverError("Cholesky factorization of the Laplacian failed");
    FactorMatrix f;
    f.b_tilde = llt.matrixU();
    return f;
}

} // namespace epijoint
