#include <catch_amalgamated.hpp>

#include <wgdirac/bands.hpp>

#include <cmath>

using namespace wgdirac;

namespace {

constexpr double kLamStar = 52.67364906566;

} // namespace

TEST_CASE("Dirac point of the unperturbed disk lattice")
{
    const ObstacleShape s = make_disk(0.1, 32);
    const BandSolver b(s, KernelParams{});
    const auto vals = b.all_in(kPi, 0.0, 45.0, 60.0);
    REQUIRE(vals.size() == 2);
    CHECK(std::abs(vals[0] - kLamStar) < 1e-7);
    CHECK(std::abs(vals[1] - kLamStar) < 1e-7);
}

TEST_CASE("shrinking Dirichlet obstacles relax toward the empty-strip eigenvalue")
{
    // shift above p^2 decays like 1 / log(1 / radius)
    const ObstacleShape a = make_disk(0.01, 32), b = make_disk(0.001, 32);
    const double la = BandSolver(a, KernelParams{}).band_lambda(1.0, 1, 0.0, 0.0, 30.0).lambda;
    const double lb = BandSolver(b, KernelParams{}).band_lambda(1.0, 1, 0.0, 0.0, 30.0).lambda;
    CHECK(lb > 1.0);
    CHECK(la > lb);
    const double ratio = (la - 1.0) / (lb - 1.0);
    CHECK(ratio > 1.2);
    CHECK(ratio < 2.0);
}

TEST_CASE("bands are symmetric under p -> 2 pi - p")
{
    const ObstacleShape s = make_disk(0.1, 32);
    const BandSolver b(s, KernelParams{});
    for (int band : {1, 2}) {
        const double a = b.band_lambda(kPi / 3, band, 0.01, 0.0, 80.0).lambda;
        const double c = b.band_lambda(2 * kPi - kPi / 3, band, 0.01, 0.0, 80.0).lambda;
        CHECK(std::abs(a - c) < 1e-9 * a);
    }
}

TEST_CASE("perturbation opens a gap at p = pi")
{
    const ObstacleShape s = make_disk(0.1, 32);
    const BandSolver b(s, KernelParams{});
    const double l1 = b.band_lambda(kPi, 1, 0.02, 40.0, 65.0).lambda;
    const double l2 = b.band_lambda(kPi, 2, 0.02, 40.0, 65.0).lambda;
    CHECK(l2 - l1 > 1e-2);
    CHECK(l1 < kLamStar);
    CHECK(l2 > kLamStar);
    const double m1 = b.band_lambda(kPi, 1, -0.02, 40.0, 65.0).lambda;
    CHECK(std::abs(m1 - l1) < 1e-8 * l1);
}

TEST_CASE("bracket errors")
{
    const ObstacleShape s = make_disk(0.1, 32);
    const BandSolver b(s, KernelParams{});
    CHECK_THROWS_AS(b.find_band_lambda(kPi, 45.0, 50.0, 0.0), Error);
    try {
        b.find_band_lambda(kPi, 45.0, 60.0, 0.0);
        FAIL("expected an ambiguous bracket");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::AmbiguousBracket);
    }
    CHECK(b.count_below(kPi, 60.0, 0.0) - b.count_below(kPi, 45.0, 0.0) == 2);
}

TEST_CASE("band trace is monotone in p on [0, pi] for the first band")
{
    const ObstacleShape s = make_disk(0.1, 32);
    const BandSolver b(s, KernelParams{});
    std::vector<double> grid;
    for (int i = 0; i <= 8; ++i) grid.push_back(0.2 + (kPi - 0.2) * i / 8.0);
    const DispersionCurve c = trace_band(b, 1, grid, 0.0, 0.0, 60.0, 2);
    REQUIRE(c.lambdas.size() == grid.size());
    for (size_t i = 1; i < grid.size(); ++i) CHECK(c.lambdas[i] > c.lambdas[i - 1]);
    for (double sm : c.sigma_mins) CHECK(sm >= 0.0);
}
