#include "epijoint/synthetic.hpp"

#include "epijoint/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace epijoint {

std::vector<int> ClusterSpec::sizes() const
{
    std::vector<int> out(static_cast<std::size_t>(std::max(n_clusters, 0)), 0);
    for (int a : assignment)
        if (a >= 0 && a < n_clusters)
            ++out[static_cast<std::size_t>(a)];
    return out;
}

void ClusterSpec::validate() const
{
    if (n_clusters < 1 || n_clusters > territories())
        throw ParameterError("number of clusters must be in 1..C");
    for (int a : assignment)
        if (a < 0 || a >= n_clusters)
            throw ParameterError("cluster index out of range");
    for (int s : sizes())
        if (s == 0)
            throw ParameterError("every cluster must contain at least one territory");
}

ClusterSpec ClusterSpec::contiguous(int n_territories, int n_clusters)
{
    if (n_clusters < 1 || n_clusters > n_territories)
        throw ParameterError("number of clusters must be in 1..C");
    ClusterSpec spec;
    spec.n_clusters = n_clusters;
    spec.assignment.resize(static_cast<std::size_t>(n_territories));
    for (int c = 0; c < n_territories; ++c)
        spec.assignment[static_cast<std::size_t>(c)] =
            static_cast<int>(static_cast<long>(c) * n_clusters / n_territories);
    return spec;
}

namespace {

GraphLaplacian normalized(Matrix l)
{
    const double trace = l.trace();
    if (!(trace > 0.0))
        throw ParameterError("the empty graph has no trace-normalized Laplacian");
    l *= static_cast<double>(l.rows()) / trace;
    // Rebuild the diagonal from the scaled off-diagonals so rows sum to zero.
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        l(i, i) = -(l.row(i).sum() - l(i, i));
    return GraphLaplacian{std::move(l)};
}

} // namespace

GraphLaplacian cluster_laplacian(const ClusterSpec& spec)
{
    spec.validate();
    const int n = spec.territories();
    Matrix adj = Matrix::Zero(n, n);
    for (int c = 0; c < n; ++c)
        for (int cp = 0; cp < n; ++cp)
            if (c != cp && spec.assignment[static_cast<std::size_t>(c)]
                               == spec.assignment[static_cast<std::size_t>(cp)])
                adj(c, cp) = 1.0;
    if (adj.sum() == 0.0)
        throw ParameterError("all clusters are singletons: the graph would be empty");
    return normalized(laplacian_from_adjacency(adj));
}

GraphLaplacian blur_laplacian(const GraphLaplacian& l_star, double blur_weight)
{
    if (!(blur_weight >= 0.0))
        throw ParameterError("blur weight must be nonnegative");
    const Eigen::Index n = l_star.size();
    Matrix adj = -l_star.l;
    for (Eigen::Index i = 0; i < n; ++i) {
        adj(i, i) = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && adj(i, j) == 0.0)
                adj(i, j) = blur_weight;
    }
    return normalized(laplacian_from_adjacency(adj));
}

ClusterSpec connected_components(const GraphLaplacian& l, double threshold)
{
    const auto n = static_cast<int>(l.size());
    ClusterSpec spec;
    spec.assignment.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> stack;
    for (int root = 0; root < n; ++root) {
        if (spec.assignment[static_cast<std::size_t>(root)] >= 0)
            continue;
        const int label = spec.n_clusters++;
        spec.assignment[static_cast<std::size_t>(root)] = label;
        stack.push_back(root);
        while (!stack.empty()) {
            const int c = stack.back();
            stack.pop_back();
            for (int cp = 0; cp < n; ++cp)
                if (cp != c && spec.assignment[static_cast<std::size_t>(cp)] < 0
                    && std::abs(l.l(c, cp)) > threshold) {
                    spec.assignment[static_cast<std::size_t>(cp)] = label;
                    stack.push_back(cp);
                }
        }
    }
    return spec;
}

namespace {

Vector piecewise_linear(int n_days, Rng& rng, const RDaggerOptions& o)
{
    const auto n_breaks = static_cast<int>(rng.integer(o.min_breakpoints, o.max_breakpoints));
    // Distinct interior knots by partial Fisher-Yates over 1..T-2.
    std::vector<int> pool(static_cast<std::size_t>(n_days - 2));
    std::iota(pool.begin(), pool.end(), 1);
    for (int i = 0; i < n_breaks; ++i) {
        const auto j = static_cast<std::size_t>(rng.integer(i, static_cast<int>(pool.size()) - 1));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    std::vector<int> knots(pool.begin(), pool.begin() + n_breaks);
    knots.push_back(0);
    knots.push_back(n_days - 1);
    std::sort(knots.begin(), knots.end());

    std::vector<double> values(knots.size());
    for (double& v : values)
        v = rng.uniform(o.min_value, o.max_value);

    Vector r(n_days);
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const int t0 = knots[k];
        const int t1 = knots[k + 1];
        for (int t = t0; t <= t1; ++t) {
            const double frac = static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
            r[t] = std::max(o.floor, values[k] + frac * (values[k + 1] - values[k]));
        }
    }
    return r;
}

bool plausible_growth(const Vector& r, const RDaggerOptions& o)
{
    const double lo = std::log(o.growth_floor);
    const double hi = std::log(o.growth_ceiling);
    double g = 0.0;
    for (Eigen::Index t = 0; t < r.size(); ++t) {
        g += std::log(r[t]) / o.serial_mean;
        if (g < lo || g > hi)
            return false;
    }
    return true;
}

} // namespace

Matrix generate_r_dagger(int n_days, int n_clusters, std::uint64_t seed, const RDaggerOptions& opts)
{
    if (n_days < 30)
        throw ParameterError("R trajectories need at least 30 days");
    if (n_clusters < 1)
        throw ParameterError("need at least one cluster");
    if (opts.min_breakpoints < 0 || opts.max_breakpoints < opts.min_breakpoints
        || opts.max_breakpoints > n_days - 2)
        throw ParameterError("invalid breakpoint range");

    Matrix out(n_clusters, n_days);
    for (int i = 0; i < n_clusters; ++i) {
        Rng rng(derive_seed(seed, 0x7100 + static_cast<std::uint64_t>(i)));
        Vector r = piecewise_linear(n_days, rng, opts);
        for (int attempt = 1; attempt < opts.max_attempts && !plausible_growth(r, opts); ++attempt)
            r = piecewise_linear(n_days, rng, opts);
        out.row(i) = r.transpose();
    }
    return out;
}

std::int64_t sample_poisson(double rate, Rng& rng)
{
    if (!(rate >= 0.0) || !std::isfinite(rate))
        throw ParameterError("Poisson rate must be finite and nonnegative");
    if (rate == 0.0)
        return 0;
    if (rate < 30.0) {
        // Sequential inversion of the CDF.
        const double u = rng.uniform();
        double p = std::exp(-rate);
        double cdf = p;
        std::int64_t k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= rate / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }
    // Hormann's PTRS.
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform_open();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr)
            return static_cast<std::int64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us))
            continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b)
            <= -rate + k * loglam - std::lgamma(k + 1.0))
            return static_cast<std::int64_t>(k);
    }
}

SampledCounts sample_counts(const ReproMatrix& r_star, const Vector& z0, const SerialInterval& phi,
                            std::uint64_t seed)
{
    const Eigen::Index n_terr = r_star.rows();
    const Eigen::Index n_days = r_star.cols();
    if (z0.size() != n_terr)
        throw DimensionError("need one initial count per territory");
    if ((z0.array() <= 0.0).any())
        throw ParameterError("initial counts must be positive");
    if ((r_star.array() < 0.0).any())
        throw ParameterError("reproduction numbers must be nonnegative");

    const int tau = phi.truncation();
    SampledCounts out;
    out.z = Matrix::Zero(n_terr, n_days);
    out.history.resize(n_terr, tau);
    out.scale.gamma = 0.01 * z0;
    out.scale.omega = out.scale.gamma.cwiseInverse();

    for (Eigen::Index c = 0; c < n_terr; ++c) {
        out.history.row(c).setConstant(z0[c]);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        const double gamma = out.scale.gamma[c];
        for (Eigen::Index t = 0; t < n_days; ++t) {
            double pressure = 0.0;
            for (int s = 1; s <= tau; ++s) {
                const Eigen::Index src = t - s;
                pressure += phi(s) * (src >= 0 ? out.z(c, src) : out.history(c, tau + src));
            }
            const double rate = r_star(c, t) * pressure / gamma;
            if (rate > 1e12)
                throw ParameterError("Poisson rate overflow in territory " + std::to_string(c)
                                     + " at day " + std::to_string(t)
                                     + "; use smaller initial counts");
            out.z(c, t) = gamma * static_cast<double>(sample_poisson(rate, rng));
        }
    }
    return out;
}

Infectiousness SyntheticDataset::phi_z(const SerialInterval& phi) const
{
    return infectiousness(z.counts, phi, history);
}

SyntheticDataset make_synthetic(const SyntheticConfig& cfg, const SerialInterval& phi)
{
    SyntheticDataset ds;
    ds.seed = cfg.seed;
    ds.clusters = ClusterSpec::contiguous(cfg.territories, cfg.clusters);
    ds.l_star = cluster_laplacian(ds.clusters);

    const Matrix r_dagger = generate_r_dagger(cfg.days, cfg.clusters, derive_seed(cfg.seed, 1));
    ds.r_star.resize(cfg.territories, cfg.days);
    for (int c = 0; c < cfg.territories; ++c)
        ds.r_star.row(c) = r_dagger.row(ds.clusters.assignment[static_cast<std::size_t>(c)]);

    ds.z0 = Vector::Constant(cfg.territories, cfg.z0);
    SampledCounts sc = sample_counts(ds.r_star, ds.z0, phi, derive_seed(cfg.seed, 2));
    ds.z.counts = std::move(sc.z);
    ds.scale = std::move(sc.scale);
    ds.history = std::move(sc.history);
    for (int c = 0; c < cfg.territories; ++c)
        ds.z.territory_ids.push_back("T" + std::to_string(c + 1));
    for (int t = 0; t < cfg.days; ++t)
        ds.z.dates.push_back(std::to_string(t + 1));
    return ds;
}

} // namespace epijoint
