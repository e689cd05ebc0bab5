#include <catch_amalgamated.hpp>

#include <wgdirac/dirac.hpp>
#include <wgdirac/fdoracle.hpp>
#include <wgdirac/interface.hpp>

#include <cmath>

using namespace wgdirac;

namespace {

const ObstacleShape& disk()
{
    static const ObstacleShape s = make_disk(0.1, 32);
    return s;
}

const DiracData& dirac()
{
    static const DiracData d = analyze_dirac(BandSolver(disk(), KernelParams{}), 20.0, 90.0);
    return d;
}

InterfaceParams params(int m, int scan)
{
    InterfaceParams ip;
    ip.m_nodes = m;
    ip.scan_points = scan;
    return ip;
}

// Mode at delta = 0.01 with the default quadrature, reconstructed once.
const InterfaceModeResult& mode()
{
    static const InterfaceModeResult r = [] {
        const InterfaceParams ip = params(32, 11);
        InterfaceModeResult m = find_interface_eigenvalue(disk(), KernelParams{}, gap_interval(dirac(), 0.01, 0.9), ip);
        reconstruct_interface_mode(disk(), KernelParams{}, m, ip);
        return m;
    }();
    return r;
}

} // namespace

TEST_CASE("interface operator is symmetric and invariant under exchanging the sides")
{
    const InterfaceParams ip = params(24, 7);
    const auto a = assemble_interface_operator(disk(), KernelParams{}, 52.4, 0.01, -0.01, ip);
    const auto b = assemble_interface_operator(disk(), KernelParams{}, 52.4, -0.01, 0.01, ip);
    CHECK(symmetry_defect(a.matrix) < 1e-4);
    CHECK((a.matrix - b.matrix).norm() < 1e-12 * a.matrix.norm());
}

TEST_CASE("too few interface nodes are rejected")
{
    CHECK_THROWS_AS(assemble_interface_operator(disk(), KernelParams{}, 52.4, 0.01, params(16, 7)), Error);
}

TEST_CASE("a single interface eigenvalue lies in the gap")
{
    const InterfaceModeResult& r = mode();
    CHECK(r.gap.contains(r.lambda_star_mode));
    CHECK(r.dips == 1);
    CHECK(r.crossings == 1);
    CHECK(r.sigma_min_at_root < 1e-8);
    REQUIRE(r.sigma_scan.size() == 11);
    CHECK(r.sigma_scan.front()[1] > 0.5);
    CHECK(r.sigma_scan.back()[1] > 0.5);
    // unit norm in the quadrature-weighted inner product on the interface
    CHECK(std::abs(std::sqrt(GammaGrid{int(r.density.size())}.h()) * r.density.norm() - 1.0) < 1e-12);
}

TEST_CASE("coarser interface quadrature gives the same eigenvalue")
{
    const auto coarse = find_interface_eigenvalue(disk(), KernelParams{}, gap_interval(dirac(), 0.01, 0.9), params(24, 7));
    CHECK(std::abs(coarse.lambda_star_mode - mode().lambda_star_mode) < 1e-3);
}

TEST_CASE("reconstructed field satisfies the interface and obstacle conditions")
{
    const InterfaceModeResult& r = mode();
    CHECK(r.continuity_residual < 5e-2);
    CHECK(r.derivative_residual < 5e-2);
    CHECK(r.dirichlet_residual < 1e-2);
    CHECK(r.decay.kappa > 0.0);
    CHECK(r.decay.r2 > 0.95);
}

TEST_CASE("interface density resembles the even Dirac mode")
{
    CHECK(even_mode_pairing(mode().density, dirac(), disk(), KernelParams{}) > 0.5);
}

TEST_CASE("finite-difference supercell agrees with the interface eigenvalue")
{
    const InterfaceModeResult& r = mode();
    const auto fd = fd_supercell_interface(disk(), 0.01, 12, 60, r.gap.e1, r.gap.e2);
    REQUIRE(fd.found);
    CHECK(std::abs(fd.lambda - r.lambda_star_mode) < 0.2 * r.gap.width());
    CHECK(std::abs(fd.decay.kappa - r.decay.kappa) < 0.25 * fd.decay.kappa);
}

TEST_CASE("interface eigenvalue stays inside the gap as delta varies")
{
    for (double delta : {0.0075, 0.015}) {
        const GapInterval g = gap_interval(dirac(), delta, 0.9);
        const auto r = find_interface_eigenvalue(disk(), KernelParams{}, g, params(24, 7));
        CHECK(g.contains(r.lambda_star_mode));
        CHECK(r.dips == 1);
        // offset from the Dirac value stays within the first-order gap half width
        CHECK(std::abs(r.lambda_star_mode - dirac().lambda_star) < delta * std::abs(dirac().beta_star));
    }
}
