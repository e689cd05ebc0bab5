#include <catch_amalgamated.hpp>

#include <wgdirac/bands.hpp>
#include <wgdirac/fdoracle.hpp>

#include <cmath>

using namespace wgdirac;

namespace {

const ObstacleShape& disk()
{
    static const ObstacleShape s = make_disk(0.1, 32);
    return s;
}

// Band edges around the Dirac point from the integral solver, shrunk by c = 0.9
// about the Dirac value.
std::pair<double, double> bie_gap(double delta)
{
    const BandSolver solver(disk(), KernelParams{});
    const double mid = dirac_point(solver, 20.0, 90.0).lambda_star;
    const int base = solver.count_below(kPi, 20.0, delta);
    const double e1 = solver.band_lambda(kPi, base + 1, delta, 20.0, 90.0).lambda;
    const double e2 = solver.band_lambda(kPi, base + 2, delta, 20.0, 90.0).lambda;
    const double half = 0.9 * 0.5 * (e2 - e1);
    return {mid - half, mid + half};
}

} // namespace

TEST_CASE("empty strip reproduces p squared")
{
    const auto modes = FDProblem::empty_cell(1.0, 40).eigs_near(0.0, 2);
    REQUIRE(modes.size() == 2);
    CHECK(std::abs(modes[0].lambda - 1.0) < 1e-3);
    // second eigenvalue is (2 pi - 1)^2
    CHECK(std::abs(modes[1].lambda - std::pow(kTwoPi - 1.0, 2)) < 0.05);
}

TEST_CASE("grid resolution is enforced")
{
    CHECK_THROWS_AS(fd_bloch_eigs(disk(), 1.0, 0.0, 2, 40), Error);
    CHECK_THROWS_AS(fd_bloch_eigs(disk(), 1.0, 0.0, 2, 61), Error);
}

TEST_CASE("Bloch values are symmetric under p -> 2 pi - p")
{
    const double p = kPi / 3.0;
    const auto a = fd_bloch_eigs(disk(), p, 0.01, 4, 60);
    const auto b = fd_bloch_eigs(disk(), kTwoPi - p, 0.01, 4, 60);
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-8 * a[i]);
}

TEST_CASE("band values converge at second order")
{
    const double p = kPi / 2.0;
    const double l1 = fd_bloch_eigs(disk(), p, 0.0, 1, 60)[0];
    const double l2 = fd_bloch_eigs(disk(), p, 0.0, 1, 120)[0];
    const double l4 = fd_bloch_eigs(disk(), p, 0.0, 1, 240)[0];
    const double order = std::log2((l2 - l1) / (l4 - l2));
    CHECK(order > 1.7);
    CHECK(order < 2.3);
}

TEST_CASE("Richardson extrapolation agrees with the integral solver")
{
    const BandSolver solver(disk(), KernelParams{});
    for (const double p : {kPi / 2.0, kPi}) {
        for (int band = 1; band <= 2; ++band) {
            const auto r = fd_band_richardson(disk(), p, 0.0, band, 80);
            const double bie = solver.band_lambda(p, band, 0.0, 0.5, 200.0).lambda;
            CHECK(std::abs(r.extrapolated - bie) < 5e-3 * bie);
            CHECK(std::abs(r.extrapolated - bie) < std::abs(r.fine - bie));
        }
    }
}

TEST_CASE("supercell carries one localized mode inside the gap")
{
    const auto [e1, e2] = bie_gap(0.01);
    REQUIRE(e1 < e2);
    const auto r = fd_supercell_interface(disk(), 0.01, 12, 60, e1, e2);
    REQUIRE(r.found);
    CHECK(r.in_gap.size() == 1);
    CHECK(r.decay.kappa > 0.0);
    CHECK(r.decay.r2 > 0.95);
    CHECK(std::isfinite(r.symmetry_residual));

    const auto r2 = fd_supercell_interface(disk(), 0.01, 24, 60, e1, e2);
    REQUIRE(r2.found);
    CHECK(r2.in_gap.size() == 1);
    CHECK(std::abs(r2.lambda - r.lambda) < 1e-4 * r.lambda);
}

TEST_CASE("no gap means no interface mode")
{
    const auto r = fd_supercell_interface(disk(), 0.01, 12, 60, 52.0, 52.1);
    CHECK_FALSE(r.found);
    CHECK(r.in_gap.empty());
}
