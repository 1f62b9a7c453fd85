#pragma once

#include "epijoint/joint.hpp"
#include "epijoint/metrics.hpp"
#include "epijoint/synthetic.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace epijoint {

enum class Method { ml, epiestim, fix_l_empty, fix_l_blur, fix_l_star, joint };

inline constexpr std::array<Method, 6> kAllMethods = {Method::ml,         Method::epiestim,
                                                      Method::fix_l_empty, Method::fix_l_blur,
                                                      Method::fix_l_star, Method::joint};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

// n geometrically spaced points from lo to hi, both included.
std::vector<double> log_grid(double lo, double hi, int n);

// Search space of one method. Dimensions the method does not use are ignored.
struct GridSpec {
    std::vector<double> lambda_t;
    std::vector<double> lambda_s;
    std::vector<double> lambda_l;
    std::vector<int> tau;

    // Sorts every dimension ascending and drops duplicates.
    void normalize();
    // Throws ParameterError unless the dimensions used by m are non-empty,
    // positive, and tau values are odd.
    void validate(Method m) const;
    std::size_t size(Method m) const;

    static GridSpec default_for(Method m);
    // Same ranges with n points on every lambda axis (tau unchanged).
    static GridSpec reduced_for(Method m, int n);
};

void to_json(nlohmann::json& j, const GridSpec& g);
// Each axis is either an explicit array or {"min", "max", "points"}.
void from_json(const nlohmann::json& j, GridSpec& g);

struct BenchGrids {
    GridSpec epiestim;
    GridSpec fix_l_empty;
    GridSpec fix_l;
    GridSpec joint;

    const GridSpec& for_method(Method m) const;
    // 64 lambda_t values, 16 x 16, 8 x 8 x 8.
    static BenchGrids full();
    // 4 points per lambda axis.
    static BenchGrids smoke();
};

void to_json(nlohmann::json& j, const BenchGrids& g);
void from_json(const nlohmann::json& j, BenchGrids& g);

struct Hyperparameters {
    double lambda_t = 0.0;
    double lambda_s = 0.0;
    double lambda_l = 0.0;
    int tau = 0;
};

struct EvalOptions {
    double blur_weight = 0.05;
    int n_max = 10;
    PdConfig inner;
    // Relative slack of the descent checks after R- and L-steps.
    double r_step_slack = 1e-6;
    double l_step_slack = 1e-9;
};

// Outcome of one method at one grid point.
struct PointResult {
    Hyperparameters hyper;
    double mrse = 0.0;
    bool failed = false;
    std::string error;
    ReproMatrix r_hat;
    // Joint only.
    GraphLaplacian l_hat;
    int descent_violations = 0;
    int laplacian_violations = 0;
    int unconverged_inner = 0;
};

PointResult evaluate_point(Method m, const SyntheticDataset& data, const SerialInterval& phi,
                           const Hyperparameters& h, const EvalOptions& opts = {});

struct GridResult {
    PointResult best;
    std::size_t points = 0;
    int failed_points = 0;
    int descent_violations = 0;
    int laplacian_violations = 0;
    int unconverged_inner = 0;
};

// Exhaustive search; the smallest mRSE wins, ties go to the lexicographically
// smallest (lambda_t, lambda_s, lambda_l, tau). Failed points count as +inf.
// Points are evaluated in parallel when OpenMP is available.
GridResult grid_search(Method m, const SyntheticDataset& data, const SerialInterval& phi,
                       const GridSpec& grid, const EvalOptions& opts = {});

struct BenchOptions {
    int n_seeds = 20;
    std::uint64_t first_seed = 0;
    SyntheticConfig data;
    BenchGrids grids = BenchGrids::full();
    EvalOptions eval;
    double support_threshold = 1e-6;
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    std::function<void(const std::string&)> progress;
};

struct MethodSummary {
    Method method = Method::ml;
    std::vector<double> mrse;           // per seed
    std::vector<Hyperparameters> best;  // per seed
    double mean = 0.0;
    double half_width = 0.0;            // 1.96 std / sqrt(n)
    int failed_points = 0;
    int descent_violations = 0;
    int laplacian_violations = 0;
    int unconverged_inner = 0;
    double seconds = 0.0;
};

struct BenchReport {
    std::vector<std::uint64_t> seeds;
    std::vector<MethodSummary> methods;
    // Joint estimate at the selected point, per seed.
    std::vector<double> laplacian_error;
    std::vector<SupportRecovery> support;
    double support_threshold = 1e-6;
    BenchGrids grids;
    double seconds = 0.0;

    const MethodSummary* find(Method m) const;
    int support_recovered() const;
    nlohmann::json to_json() const;
    static BenchReport from_json(const nlohmann::json& j);
    // Plain-text table: one column per method, mean (half-width) x 1e-4.
    std::string to_table() const;
};

BenchReport run_benchmark(const BenchOptions& opts);

} // namespace epijoint
