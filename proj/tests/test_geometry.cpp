#include <catch_amalgamated.hpp>

#include <wgdirac/geometry.hpp>

#include <algorithm>
#include <cmath>

using namespace wgdirac;
using Catch::Approx;

TEST_CASE("disk perimeter and node reflection")
{
    const auto d = make_disk(0.1, 64);
    CHECK(std::abs(d.perimeter() - 0.2 * kPi) < 1e-12);
    for (int j = 0; j < d.n_nodes(); ++j) {
        const Point a = d.nodes()[j];
        const Point b = d.nodes()[d.reflected_index(j)];
        CHECK(std::abs(a.x1 + b.x1) < 1e-14);
        CHECK(std::abs(a.x2 - b.x2) < 1e-14);
        CHECK(std::abs(d.weights()[j] - 0.2 * kPi / 64) < 1e-15);
    }
}

TEST_CASE("invalid shapes are rejected")
{
    CHECK_THROWS_AS(make_disk(0.3, 64), Error);
    CHECK_THROWS_AS(make_disk(0.2, 64), Error);
    CHECK_THROWS_AS(make_disk(0.1, 15), Error);
    CHECK_THROWS_AS(make_disk(0.1, 8), Error);
    CHECK_THROWS_AS(make_shape({0.1, 0.0, -0.2}, 64), Error);
    try {
        make_disk(0.3, 64);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Geometry);
    }
}

TEST_CASE("perturbed shape stays mirror symmetric")
{
    const auto s = make_shape({0.1, 0.0, 0.015, 0.0, 0.004}, 64);
    for (int j = 0; j < s.n_nodes(); ++j) {
        const Point a = s.nodes()[j];
        const Point b = s.nodes()[s.reflected_index(j)];
        CHECK(std::abs(a.x1 + b.x1) < 1e-14);
        CHECK(std::abs(a.x2 - b.x2) < 1e-14);
        const double t = s.param(j);
        CHECK(std::abs(s.radius_at(t) - s.radius_at(kPi - t)) < 1e-15);
    }
    // trapezoid perimeter against a much finer resampling
    const auto fine = with_nodes(s, 512);
    CHECK(std::abs(s.perimeter() - fine.perimeter()) < 1e-10 * fine.perimeter());
    for (int j = 0; j < s.n_nodes(); ++j) {
        const Point n = s.normals()[j];
        const Point t = s.tangent_at(s.param(j));
        CHECK(std::abs(n.x1 * t.x1 + n.x2 * t.x2) < 1e-14);
        CHECK(std::abs(norm(n) - 1.0) < 1e-14);
        // outward: normal points away from the center
        CHECK(n.x1 * s.nodes()[j].x1 + n.x2 * s.nodes()[j].x2 > 0.0);
    }
}

TEST_CASE("layout centers")
{
    const auto u = layout_centers(Variant::Unperturbed, 0.0, 2);
    REQUIRE(u.centers.size() == 4);
    CHECK(u.centers[0].x1 == Approx(0.25));
    CHECK(u.centers[1].x1 == Approx(0.75));
    CHECK(u.centers[0].x2 == Approx(0.25));
    CHECK(u.centers[2].x1 == Approx(1.25));

    const auto pd = layout_centers(Variant::PlusDelta, 0.01, 1);
    CHECK(pd.centers[1].x1 - pd.centers[0].x1 == Approx(0.52).epsilon(1e-14));
    const auto md = layout_centers(Variant::MinusDelta, 0.01, 1);
    CHECK(md.centers[1].x1 - md.centers[0].x1 == Approx(0.48).epsilon(1e-14));

    CHECK_THROWS_AS(layout_centers(Variant::PlusDelta, 0.06, 1), Error);
    CHECK_THROWS_AS(layout_centers(Variant::PlusDelta, 0.01, 0), Error);
}

static bool same_set(std::vector<double> a, std::vector<double> b, double tol)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

TEST_CASE("dimerized layouts are mirror images")
{
    // reflection about the unperturbed obstacle position x1 = 1/4, modulo the period
    const double d = 0.013;
    const auto pd = layout_centers(Variant::PlusDelta, d, 1);
    const auto md = layout_centers(Variant::MinusDelta, d, 1);
    std::vector<double> a, b;
    for (auto c : pd.centers) a.push_back(c.x1);
    for (auto c : md.centers) {
        double r = 0.5 - c.x1;
        r -= std::floor(r);
        b.push_back(r);
    }
    CHECK(same_set(a, b, 1e-15));
}

TEST_CASE("joint layout glues the two dimerizations")
{
    const double d = 0.01;
    const auto j = layout_centers(Variant::Joint, d, 4);
    REQUIRE(j.centers.size() == 16);
    std::vector<double> right, left;
    for (auto c : j.centers) (c.x1 > 0 ? right : left).push_back(c.x1);
    // right half is the +delta structure, left half the -delta structure
    std::vector<double> pd, md;
    for (auto c : layout_centers(Variant::PlusDelta, d, 4).centers) pd.push_back(c.x1);
    for (auto c : layout_centers(Variant::MinusDelta, d, 4).centers) md.push_back(c.x1 - 4.0);
    CHECK(same_set(right, pd, 1e-14));
    CHECK(same_set(left, md, 1e-14));

    // its mirror image is the joint structure of the opposite dimerization
    const auto jm = layout_centers(Variant::Joint, -d, 4);
    std::vector<double> mirrored, other;
    for (auto c : j.centers) mirrored.push_back(-c.x1);
    for (auto c : jm.centers) other.push_back(c.x1);
    CHECK(same_set(mirrored, other, 1e-15));

    // obstacles adjacent to the interface sit 1/2 apart
    CHECK(*std::min_element(right.begin(), right.end()) - *std::max_element(left.begin(), left.end()) ==
          Approx(0.5).epsilon(1e-14));
}

TEST_CASE("fingerprint tracks coefficients")
{
    CHECK(make_disk(0.1, 32).fingerprint() == make_disk(0.1, 32).fingerprint());
    CHECK(make_disk(0.1, 32).fingerprint() != make_disk(0.1, 64).fingerprint());
    CHECK(make_disk(0.1, 32).fingerprint() != make_disk(0.11, 32).fingerprint());
}
