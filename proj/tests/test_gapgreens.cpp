#include <catch_amalgamated.hpp>

#include <wgdirac/gapgreens.hpp>

#include <cmath>
#include <filesystem>

using namespace wgdirac;

namespace {

const ObstacleShape& disk()
{
    static const ObstacleShape s = make_disk(0.1, 32);
    return s;
}

constexpr double kDelta = 0.01;
constexpr double kLambda = 52.3; // inside the delta = 0.01 gap

const GapGreens& greens()
{
    static const GapGreens g(disk(), kDelta, kLambda, KernelParams{}, 64);
    return g;
}

} // namespace

TEST_CASE("Brillouin nodes avoid empty-strip poles and integrate constants")
{
    const auto nodes = brillouin_nodes(kLambda, 64);
    double w = 0.0;
    for (const auto& n : nodes) {
        w += n.weight;
        CHECK(n.p >= 0.0);
        CHECK(n.p <= kPi);
        CHECK(empty_pole_distance(n.p, kLambda) > 1e-3);
    }
    CHECK(std::abs(w - 1.0) < 1e-12);
}

TEST_CASE("gap Green's function is reciprocal and reflection symmetric")
{
    const GapGreens& g = greens();
    const Point x{0.0, 0.13}, y{0.0, 0.41}, z{1.6, 0.2};
    CHECK(std::abs(g(x, y) - g(y, x)) < 1e-4 * std::abs(g(x, y)));
    CHECK(std::abs(g(z, y) - g(y, z)) < 1e-4 * std::abs(g(z, y)));
    // the joint structure maps to itself under x1 -> -x1
    CHECK(std::abs(g(z, y) - g({-1.6, 0.2}, y)) < 1e-4 * std::abs(g(z, y)));
}

TEST_CASE("gap Green's function decays along the guide")
{
    const GapGreens& g = greens();
    const Point y{0.0, 0.41};
    const double near = std::abs(g({1.0, 0.3}, y));
    const double far = std::abs(g({4.0, 0.3}, y));
    CHECK(far < std::exp(-1.0) * near);
}

TEST_CASE("doubling the Brillouin nodes leaves the values unchanged")
{
    const GapGreens fine(disk(), kDelta, kLambda, KernelParams{}, 128);
    for (const auto& [x, y] : std::vector<std::pair<Point, Point>>{{{0.0, 0.13}, {0.0, 0.41}}, {{1.6, 0.2}, {0.0, 0.41}}})
        CHECK(std::abs(fine(x, y) - greens()(x, y)) < 1e-4 * std::abs(fine(x, y)));
}

TEST_CASE("residual operator vanishes on an exact guided wave")
{
    const double k = std::sqrt(kLambda - 4.0 * kPi * kPi);
    const auto u = [&](Point x) { return std::sin(kTwoPi * x.x2) * std::cos(k * x.x1); };
    const auto r = helmholtz_residuals(u, kLambda, {{0.3, 0.2}, {1.1, 0.37}}, 1e-3);
    for (double v : r) CHECK(v < 1e-5);
}

TEST_CASE("gap Green's function solves the Helmholtz equation away from the source")
{
    const GapGreens& g = greens();
    const Point y{0.0, 0.41};
    const std::vector<Point> samples{{0.5, 0.2}, {1.3, 0.1}, {-0.6, 0.4}};
    CHECK(helmholtz_residual_check(g, y, samples, 1e-3) < 1e-2);
    // second-order stencil error halves by about four
    const double r1 = helmholtz_residual_check(g, y, samples, 1e-2);
    const double r2 = helmholtz_residual_check(g, y, samples, 5e-3);
    CHECK(r1 / r2 > 3.0);
    CHECK(r1 / r2 < 5.0);
}

TEST_CASE("interface operator matrix is symmetric")
{
    const GammaGrid grid{24};
    const MatR m = gamma_operator(greens(), grid);
    CHECK((m - m.transpose()).norm() < 1e-8 * m.norm());
    CHECK(m.allFinite());
}

TEST_CASE("cosine interpolation on the interface is exact on nodes")
{
    const GammaGrid grid{16};
    VecR f(16);
    for (int b = 0; b < 16; ++b) f[b] = std::cos(kTwoPi * grid.node(b)) + 0.3;
    for (int b = 0; b < 16; b += 5) CHECK(std::abs(gamma_interp(f, grid.node(b)) - f[b]) < 1e-12);
    CHECK(std::abs(gamma_interp(f, 0.111) - (std::cos(kTwoPi * 0.111) + 0.3)) < 1e-10);
}

TEST_CASE("Bloch table: cache, evenness, pole margin and band sum")
{
    const auto dir = std::filesystem::temp_directory_path() / "wgdirac_test_cache";
    std::filesystem::remove_all(dir);
    BlochTableParams bp;
    bp.n_bands = 6;
    bp.n_p_nodes = 32;
    bool hit = true;
    const BlochTable t = cached_bloch_table(dir, disk(), KernelParams{}, kDelta, bp, &hit);
    CHECK_FALSE(hit);
    REQUIRE(t.nodes.size() == 16);
    CHECK(t.evenness_defect < 1e-8);
    for (const auto& row : t.cell_norm)
        for (double c : row) CHECK(std::abs(c - 1.0) < 1e-10);
    CHECK(t.pole_margin(kLambda) > 1.0);
    CHECK(t.next_band_min() > kLambda);

    const BlochTable again = cached_bloch_table(dir, disk(), KernelParams{}, kDelta, bp, &hit);
    CHECK(hit);
    CHECK(again.lambda == t.lambda);
    CHECK((again.density[3][1] - t.density[3][1]).norm() == 0.0);

    // band sum approaches the resolvent value; the omitted bands are bounded by the tail estimate
    const BandSumGreens bs(t, disk(), KernelParams{});
    const GapGreens& g = greens();
    for (const auto& [x, y] : std::vector<std::pair<Point, Point>>{{{0.0, 0.13}, {0.0, 0.41}},
                                                                   {{0.5, 0.2}, {0.0, 0.3}},
                                                                   {{1.6, 0.2}, {0.0, 0.41}}}) {
        const double ref = g(x, y);
        const double two = bs(x, y, kLambda, 2), six = bs(x, y, kLambda, 6);
        CHECK(std::abs(six - ref) < 2.0 * t.tail_estimate(kLambda));
        CHECK(std::abs(six - ref) < std::abs(two - ref));
    }
    std::filesystem::remove_all(dir);
}
