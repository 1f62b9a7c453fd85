#pragma once

#include "epijoint/errors.hpp"
#include "epijoint/proximal.hpp"
#include "epijoint/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace epijoint {

// Combinatorial Laplacian of a weighted undirected graph, normalized to
// trace C: symmetric, nonpositive off-diagonals, zero row sums.
struct GraphLaplacian {
    Matrix l;

    Eigen::Index size() const noexcept { return l.rows(); }

    // Largest violation of symmetry, sign, row-sum and trace constraints.
    struct Violations {
        double asymmetry = 0.0;
        double positive_off_diagonal = 0.0;
        double row_sum = 0.0;
        double trace = 0.0;

        // Sign 1e-12, row sums 1e-9, trace 1e-9, exact symmetry.
        bool within_tolerance() const;
    };
    Violations violations() const;
    // Finite, square, and violations() within tolerance.
    bool admissible() const;
    // Edges with weight above `threshold`, as (c, c') pairs with c < c'.
    std::vector<std::pair<int, int>> edges(double threshold) const;
};

// Laplacian diag(W 1) - W of a symmetric nonnegative adjacency matrix
// (diagonal of `adjacency` ignored), without normalization.
Matrix laplacian_from_adjacency(const Matrix& adjacency);

// Gram matrix R R^T of the territory rows.
using SmoothnessGram = Matrix;
SmoothnessGram gram(const ReproMatrix& r);

// Change of variables L(w): one weight w_e <= 0 per unordered pair
// (c, c'), c < c', on the off-diagonal, diagonal equal to minus the row's
// off-diagonal sum. Row sums vanish by construction and trace(L) = C becomes
// sum_e w_e = -C/2.
class EdgeParameterization {
public:
    explicit EdgeParameterization(int n_territories);

    int territories() const noexcept { return n_; }
    int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
    const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
    int edge_index(int c, int cp) const;

    // Required value of sum_e w_e.
    double weight_sum() const noexcept { return -0.5 * n_; }

    Matrix laplacian(const Vector& w) const;
    Vector weights(const Matrix& l) const;

    // For f(w) = lambda_l ||L(w)||_F^2 + lambda_s <g, L(w)>, the Hessian
    // 2 lambda_l (S^T S + 2 I) and the linear coefficients
    // lambda_s (2 g_cc' - g_cc - g_c'c'), so f(w) = w^T H w / 2 + q^T w.
    Matrix hessian(double lambda_l) const;
    Vector linear(const SmoothnessGram& g, double lambda_s) const;

private:
    int n_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<int> index_;
};

inline EdgeParameterization reduce_to_weight_vector(int n_territories)
{
    return EdgeParameterization(n_territories);
}

// Primal weights and dual multipliers of the previous solve.
struct QpWarmStart {
    Vector weights;        // w, length C(C-1)/2, nonpositive
    double equality = 0.0; // multiplier of sum_e w_e = -C/2
    Vector bounds;         // multipliers of -w_e >= 0
};

struct QpStats {
    int newton_steps = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double complementarity = 0.0;
    bool polished = false;
    bool warm_started = false;
};

struct LaplacianSolution {
    GraphLaplacian laplacian;
    QpWarmStart state;
    QpStats stats;
};

class QpSolveError : public SolverError {
public:
    QpSolveError(const std::string& what, QpWarmStart last, QpStats stats)
        : SolverError(what), last_(std::move(last)), stats_(stats)
    {
    }
    const QpWarmStart& last_iterate() const noexcept { return last_; }
    const QpStats& stats() const noexcept { return stats_; }

private:
    QpWarmStart last_;
    QpStats stats_;
};

// Objective of the Laplacian subproblem:
// lambda_l sum L^2 + lambda_s sum g .* L.
double laplacian_qp_objective(const Matrix& l, const SmoothnessGram& g, double lambda_s,
                              double lambda_l);

// Unique minimizer of lambda_l ||L||_F^2 + lambda_s <g, L> over admissible
// Laplacians, by a primal-dual interior-point method on the reduced weight
// vector followed by an active-set polish.
LaplacianSolution solve_laplacian_qp(const SmoothnessGram& g, double lambda_s, double lambda_l,
                                     const std::optional<QpWarmStart>& warm = std::nullopt);

// B with B^T B = L + eps I, eps = 1e-12 trace(L) / C.
FactorMatrix cholesky_factor(const GraphLaplacian& l);

} // namespace epijoint
