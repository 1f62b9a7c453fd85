#pragma once

#include "epijoint/laplacian.hpp"
#include "epijoint/model.hpp"
#include "epijoint/rng.hpp"
#include "epijoint/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace epijoint {

// Partition of territories into clusters. Cluster indices are 0-based.
struct ClusterSpec {
    std::vector<int> assignment;
    int n_clusters = 0;

    int territories() const noexcept { return static_cast<int>(assignment.size()); }
    std::vector<int> sizes() const;
    void validate() const;

    // Contiguous clusters of (almost) equal size.
    static ClusterSpec contiguous(int n_territories, int n_clusters);
};

// Block-diagonal Laplacian of complete unit-weight graphs, one per cluster,
// rescaled to trace C. Singleton clusters are isolated vertices.
GraphLaplacian cluster_laplacian(const ClusterSpec& spec);

// Adds `blur_weight` (in the scale of l_star) to every absent edge, rebuilds
// the diagonal and renormalizes the trace to C.
GraphLaplacian blur_laplacian(const GraphLaplacian& l_star, double blur_weight);

// Connected components of the graph with edges |L(c,c')| > threshold, as a
// 0-based cluster index per territory, numbered by first appearance.
ClusterSpec connected_components(const GraphLaplacian& l, double threshold);

struct RDaggerOptions {
    int min_breakpoints = 4;
    int max_breakpoints = 8;
    double min_value = 0.5;
    double max_value = 2.0;
    double floor = 0.2;
    // Trajectories are redrawn until the implied epidemic size
    // exp(sum_t ln R_t / serial_mean) stays within [growth_floor, growth_ceiling]
    // relative to the initial level, so counts neither die out nor explode.
    double growth_floor = 0.2;
    double growth_ceiling = 5.0;
    double serial_mean = kSerialMeanDays;
    int max_attempts = 100000;
};

// One continuous piecewise-linear trajectory per cluster (I x T): knots at
// the first and last day plus 4-8 interior breakpoints drawn uniformly over
// time, knot values uniform in [0.5, 2], clipped below at 0.2.
Matrix generate_r_dagger(int n_days, int n_clusters, std::uint64_t seed,
                         const RDaggerOptions& opts = {});

// Z / gamma ~ Poisson(rate / gamma). Inversion below rate 30, PTRS
// transformed rejection above.
std::int64_t sample_poisson(double rate, Rng& rng);

struct SampledCounts {
    Matrix z;
    ScaleParams scale; // gamma = 0.01 Z0, omega = 1 / gamma
    Matrix history;    // C x tau pre-window, Z0 replicated
};

// Renewal sampling of counts given ground-truth reproduction numbers. Each
// territory draws from its own stream derived from `seed`.
SampledCounts sample_counts(const ReproMatrix& r_star, const Vector& z0, const SerialInterval& phi,
                            std::uint64_t seed);

struct SyntheticConfig {
    int territories = 9;
    int clusters = 3;
    int days = 300;
    double z0 = 1000.0;
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    CountMatrix z;
    ReproMatrix r_star;
    GraphLaplacian l_star;
    ScaleParams scale;
    Matrix history;
    ClusterSpec clusters;
    Vector z0;
    std::uint64_t seed = 0;

    // Infectiousness including the seeding pre-window.
    Infectiousness phi_z(const SerialInterval& phi) const;
};

inline constexpr const char* kGeneratorVersion = "piecewise-linear-v1";

SyntheticDataset make_synthetic(const SyntheticConfig& cfg, const SerialInterval& phi);

} // namespace epijoint
