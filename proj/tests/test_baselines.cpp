#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "epijoint/baselines.hpp"
#include "epijoint/errors.hpp"
#include "epijoint/rng.hpp"

#include <algorithm>

using namespace epijoint;

namespace {

std::pair<Matrix, Matrix> random_series(int c, int t, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix z(c, t);
    Matrix phi(c, t);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z.data()[i] = std::floor(rng.uniform(0.0, 200.0));
        phi.data()[i] = rng.uniform(10.0, 150.0);
    }
    return {z, phi};
}

} // namespace

TEST_CASE("ML estimate is the elementwise ratio")
{
    const auto [z, phi] = random_series(3, 40, 1);
    const ReproMatrix r = ml_estimate(z, phi);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        CHECK(r.data()[i] == z.data()[i] / phi.data()[i]);

    Matrix zz(1, 2);
    zz << 3.0, 0.0;
    Matrix pp(1, 2);
    pp << 0.0, 0.0;
    CHECK(ml_estimate(zz, pp).isZero(0.0));
    CHECK(ml_undefined_mask(pp).all());
    CHECK(!ml_undefined_mask(phi).any());
}

TEST_CASE("EpiEstim matches the windowed posterior mean")
{
    const auto [z, phi] = random_series(2, 30, 2);
    for (int tau : {1, 3, 7, 29}) {
        EpiEstimConfig cfg;
        cfg.tau = tau;
        const ReproMatrix r = epiestim_estimate(z, phi, cfg);
        for (Eigen::Index c = 0; c < 2; ++c)
            for (Eigen::Index t = 0; t < 30; ++t) {
                const Eigen::Index lo = std::max<Eigen::Index>(0, t - tau + 1);
                const double sz = z.row(c).segment(lo, t - lo + 1).sum();
                const double sp = phi.row(c).segment(lo, t - lo + 1).sum();
                CHECK(r(c, t) == doctest::Approx((1.0 + sz) / (0.2 + sp)).epsilon(1e-13));
            }
    }
}

TEST_CASE("EpiEstim recovers a constant ratio as pressure grows")
{
    Matrix phi = Matrix::Constant(1, 50, 1e6);
    Matrix z = 1.3 * phi;
    const ReproMatrix r = epiestim_estimate(z, phi);
    CHECK((r.array() - 1.3).abs().maxCoeff() <= 1e-6);
    // Tiny pressure: the prior mean a b dominates.
    const ReproMatrix prior = epiestim_estimate(Matrix::Zero(1, 5), Matrix::Zero(1, 5));
    CHECK((prior.array() - 5.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("EpiEstim is causal")
{
    auto [z, phi] = random_series(1, 30, 3);
    const ReproMatrix base = epiestim_estimate(z, phi);
    z(0, 20) += 100.0;
    const ReproMatrix moved = epiestim_estimate(z, phi);
    CHECK((moved.leftCols(20) - base.leftCols(20)).isZero(0.0));
    CHECK(moved(0, 20) > base(0, 20));
}

TEST_CASE("EpiEstim configuration validation")
{
    const auto [z, phi] = random_series(1, 10, 4);
    EpiEstimConfig cfg;
    cfg.tau = 4;
    CHECK_THROWS_AS(epiestim_estimate(z, phi, cfg), ParameterError);
    cfg.tau = 0;
    CHECK_THROWS_AS(epiestim_estimate(z, phi, cfg), ParameterError);
    cfg = {};
    cfg.prior_scale = 0.0;
    CHECK_THROWS_AS(epiestim_estimate(z, phi, cfg), ParameterError);
    CHECK_THROWS_AS(epiestim_estimate(z, phi.leftCols(5)), DimensionError);
}
