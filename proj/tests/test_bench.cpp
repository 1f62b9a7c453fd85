#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "epijoint/bench.hpp"
#include "epijoint/errors.hpp"
#include "epijoint/metrics.hpp"

#include <cmath>
#include <tuple>

using namespace epijoint;

namespace {

SyntheticDataset small_data(std::uint64_t seed)
{
    SyntheticConfig cfg;
    cfg.territories = 4;
    cfg.clusters = 2;
    cfg.days = 60;
    cfg.seed = seed;
    return make_synthetic(cfg, covid_serial_interval());
}

auto key(const Hyperparameters& h)
{
    return std::make_tuple(h.lambda_t, h.lambda_s, h.lambda_l, h.tau);
}

} // namespace

TEST_CASE("mRSE definition")
{
    ReproMatrix star(1, 4);
    star << 1.0, 2.0, 0.5, 1.0;
    ReproMatrix hat(1, 4);
    hat << 1.1, 2.0, 0.25, 0.0;
    CHECK(mrse(hat, star) == doctest::Approx((0.01 + 0.0 + 0.25 + 1.0) / 4.0).epsilon(1e-14));
    CHECK(mrse(star, star) == 0.0);
    CHECK_THROWS_AS(mrse(hat, ReproMatrix::Zero(1, 4)), ParameterError);
    CHECK_THROWS_AS(mrse(hat.leftCols(2), star), DimensionError);
}

TEST_CASE("Laplacian error and support recovery")
{
    const GraphLaplacian l = cluster_laplacian(ClusterSpec::contiguous(6, 2));
    CHECK(laplacian_recovery_error(l.l, l.l) == 0.0);
    CHECK(laplacian_recovery_error(2.0 * l.l, l.l) == doctest::Approx(1.0));

    Matrix noisy = l.l;
    noisy(0, 4) = noisy(4, 0) = -1e-7;
    CHECK(support_recovery(noisy, l.l, 1e-6).exact);
    noisy(0, 4) = noisy(4, 0) = -1e-3;
    SupportRecovery s = support_recovery(noisy, l.l, 1e-6);
    CHECK(!s.exact);
    CHECK(s.false_positives == 1);
    noisy(0, 1) = noisy(1, 0) = 0.0;
    s = support_recovery(noisy, l.l, 1e-6);
    CHECK(s.false_negatives == 1);
    CHECK_THROWS_AS(support_recovery(l.l, l.l, 0.0), ParameterError);
}

TEST_CASE("fidelity weights")
{
    Matrix z(2, 4);
    z << 0.0, 10.0, 0.0, 10.0, 1.0, 1.0, 1.0, 1.0;
    const Vector w = fidelity_weights(z);
    CHECK(w[0] == doctest::Approx(1.0 / std::sqrt(100.0 / 3.0)));
    CHECK(w[1] == 1.0);
}

TEST_CASE("method names and grids")
{
    for (Method m : kAllMethods)
        CHECK(parse_method(method_name(m)) == m);
    CHECK(parse_method("joint") == Method::joint);
    CHECK(parse_method("fix-l*") == Method::fix_l_star);
    CHECK_THROWS_AS(parse_method("nope"), ParameterError);

    const auto g = log_grid(0.01, 1000.0, 6);
    REQUIRE(g.size() == 6);
    CHECK(g.front() == 0.01);
    CHECK(g.back() == 1000.0);
    CHECK(g[1] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), ParameterError);

    const BenchGrids full = BenchGrids::full();
    CHECK(full.fix_l_empty.size(Method::fix_l_empty) == 64);
    CHECK(full.fix_l.size(Method::fix_l_star) == 256);
    CHECK(full.joint.size(Method::joint) == 512);
    CHECK(full.epiestim.size(Method::epiestim) == 15);
    CHECK(full.joint.lambda_l.front() == 0.001);
    CHECK(full.joint.lambda_l.back() == 100.0);
    CHECK(BenchGrids::smoke().joint.size(Method::joint) == 64);

    GridSpec bad;
    bad.tau = {2};
    CHECK_THROWS_AS(bad.validate(Method::epiestim), ParameterError);
    bad.lambda_t = {-1.0};
    CHECK_THROWS_AS(bad.validate(Method::fix_l_empty), ParameterError);
}

TEST_CASE("grid JSON round trip and range form")
{
    const BenchGrids g = BenchGrids::smoke();
    const nlohmann::json j = g;
    const BenchGrids back = j.get<BenchGrids>();
    CHECK(back.joint.lambda_l == g.joint.lambda_l);
    CHECK(back.epiestim.tau == g.epiestim.tau);

    const auto spec = nlohmann::json::parse(R"({"lambda_t": {"min": 1, "max": 100, "points": 3},
                                                "lambda_s": [5, 1, 5]})")
                          .get<GridSpec>();
    CHECK(spec.lambda_t.size() == 3);
    CHECK(spec.lambda_t[1] == doctest::Approx(10.0));
    GridSpec norm = spec;
    norm.normalize();
    CHECK(norm.lambda_s == std::vector<double>{1.0, 5.0});
}

TEST_CASE("grid search: minimum, lexicographic ties, singleton grid, determinism")
{
    const SyntheticDataset data = small_data(3);
    const SerialInterval phi = covid_serial_interval();

    GridSpec g;
    g.lambda_t = {1.0, 10.0};
    g.lambda_s = {0.1, 10.0};
    const GridResult res = grid_search(Method::fix_l_star, data, phi, g);
    CHECK(res.points == 4);
    CHECK(res.failed_points == 0);
    double best = INFINITY;
    Hyperparameters arg{};
    for (double lt : g.lambda_t)
        for (double ls : g.lambda_s) {
            const PointResult p = evaluate_point(Method::fix_l_star, data, phi, {lt, ls, 0.0, 0});
            if (p.mrse < best || (p.mrse == best && key(p.hyper) < key(arg))) {
                best = p.mrse;
                arg = p.hyper;
            }
        }
    CHECK(res.best.mrse == best);
    CHECK(key(res.best.hyper) == key(arg));

    // Axes the method does not use do not multiply the grid.
    GridSpec flat;
    flat.tau = {7};
    flat.lambda_t = {3.0, 2.0};
    const GridResult tie = grid_search(Method::epiestim, data, phi, flat);
    CHECK(tie.points == 1);
    CHECK(tie.best.hyper.tau == 7);

    GridSpec single;
    single.lambda_t = {2.0};
    single.lambda_s = {1.0};
    single.lambda_l = {1.0};
    const GridResult one = grid_search(Method::joint, data, phi, single);
    const PointResult direct = evaluate_point(Method::joint, data, phi, {2.0, 1.0, 1.0, 0});
    CHECK(one.points == 1);
    CHECK(one.best.mrse == direct.mrse);
    CHECK((one.best.r_hat - direct.r_hat).isZero(0.0));
    CHECK(one.descent_violations == 0);
    CHECK(one.laplacian_violations == 0);

    const GridResult again = grid_search(Method::fix_l_star, data, phi, g);
    CHECK(again.best.mrse == res.best.mrse);
}

TEST_CASE("failed points count as infinite error")
{
    SyntheticDataset data = small_data(4);
    data.r_star(0, 0) = 0.0; // mRSE undefined: every point fails
    GridSpec g;
    g.tau = {1, 3};
    const GridResult res = grid_search(Method::epiestim, data, covid_serial_interval(), g);
    CHECK(res.failed_points == 2);
    CHECK(res.best.failed);
    CHECK(std::isinf(res.best.mrse));
    CHECK(!res.best.error.empty());
}

TEST_CASE("benchmark report on a tiny configuration")
{
    BenchOptions opts;
    opts.n_seeds = 2;
    opts.first_seed = 10;
    opts.data.territories = 4;
    opts.data.clusters = 2;
    opts.data.days = 60;
    opts.grids = BenchGrids::smoke();
    opts.grids.fix_l_empty.lambda_t = {1.0, 10.0};
    opts.grids.fix_l.lambda_t = {1.0};
    opts.grids.fix_l.lambda_s = {1.0, 10.0};
    opts.grids.joint.lambda_t = {1.0};
    opts.grids.joint.lambda_s = {10.0};
    opts.grids.joint.lambda_l = {1.0};
    opts.grids.epiestim.tau = {5, 7};
    int lines = 0;
    opts.progress = [&](const std::string&) { ++lines; };
    const BenchReport rep = run_benchmark(opts);

    CHECK(rep.seeds == std::vector<std::uint64_t>{10, 11});
    CHECK(rep.methods.size() == 6);
    CHECK(lines >= 12);
    for (const MethodSummary& s : rep.methods) {
        REQUIRE(s.mrse.size() == 2);
        const double mean = 0.5 * (s.mrse[0] + s.mrse[1]);
        CHECK(s.mean == doctest::Approx(mean).epsilon(1e-14));
        const double sd = std::abs(s.mrse[0] - s.mrse[1]) / std::sqrt(2.0);
        CHECK(s.half_width == doctest::Approx(1.96 * sd / std::sqrt(2.0)).epsilon(1e-12));
    }
    CHECK(rep.support.size() == 2);
    CHECK(rep.laplacian_error.size() == 2);

    const nlohmann::json j = rep.to_json();
    CHECK(j.at("methods").size() == 6);
    CHECK(j.at("joint_graph").at("support").size() == 2);
    const BenchReport back = BenchReport::from_json(j);
    CHECK(back.seeds == rep.seeds);
    CHECK(back.laplacian_error == rep.laplacian_error);
    CHECK(back.support_recovered() == rep.support_recovered());
    REQUIRE(back.methods.size() == rep.methods.size());
    for (std::size_t i = 0; i < rep.methods.size(); ++i) {
        CHECK(back.methods[i].method == rep.methods[i].method);
        CHECK(back.methods[i].mrse == rep.methods[i].mrse);
        CHECK(back.methods[i].mean == doctest::Approx(rep.methods[i].mean).epsilon(1e-14));
        CHECK(key(back.methods[i].best[0]) == key(rep.methods[i].best[0]));
    }
    const std::string table = rep.to_table();
    for (Method m : kAllMethods)
        CHECK(table.find(std::string(method_name(m))) != std::string::npos);
}
