#include <catch_amalgamated.hpp>

#include <wgdirac/qpgreens.hpp>

#include <cmath>
#include <random>

using namespace wgdirac;

namespace {

constexpr double kLamStar = 52.67364906566;

struct PairGen {
    std::mt19937 rng{20240611};
    std::uniform_real_distribution<double> u{0.0, 1.0};
    Point point(double xspan = 2.0) { return {(u(rng) - 0.5) * xspan, 0.5 * u(rng)}; }
};

KernelParams params(double p, cplx lam)
{
    KernelParams kp;
    kp.p = p;
    kp.lambda = lam;
    return kp;
}

} // namespace

TEST_CASE("quasi-periodicity, conjugation and reciprocity on random pairs")
{
    PairGen g;
    const double h = 0.037;
    const QPKernel K(params(2.3, kLamStar));
    const QPKernel Kneg(params(-2.3, kLamStar));
    const QPKernel Kp(params(kPi + h, kLamStar));
    const QPKernel Km(params(kPi - h, kLamStar));
    const cplx eip = std::exp(cplx(0.0, 2.3));
    for (int i = 0; i < 100; ++i) {
        const Point x = g.point(), y = g.point();
        if (norm(x - y) < 1e-3) continue;
        const cplx v = K(x, y);
        CHECK(std::abs(K(x + Point{1.0, 0.0}, y) - eip * v) < 1e-12);
        CHECK(std::abs(Kp(x, y) - std::conj(Km(x, y))) < 1e-12);
        CHECK(std::abs(v - Kneg(y, x)) < 1e-12);
        CHECK(std::abs(v - std::conj(K(y, x))) < 1e-12);
    }
}

TEST_CASE("the two modal representations agree")
{
    PairGen g;
    const QPKernel K(params(1.1, 47.3));
    for (int i = 0; i < 100; ++i) {
        const Point x = g.point(), y = g.point();
        const double dn = std::abs(std::remainder(x.x1 - y.x1, 1.0));
        const double dm = std::min({std::abs(x.x2 - y.x2), x.x2 + y.x2, 1.0 - x.x2 - y.x2});
        if (dn < 0.05 || dm < 0.05) continue;
        CHECK(std::abs(K.series_m(x, y, 200) - K.series_n(x, y, 200)) < 1e-12);
    }
}

TEST_CASE("Neumann condition on both walls")
{
    const QPKernel K(params(0.7, kLamStar));
    const double h = 1e-4;
    for (double x1 : {-0.31, 0.12, 0.43}) {
        const Point y{0.05, 0.21};
        for (double wall : {0.0, 0.5}) {
            const double s = wall == 0.0 ? 1.0 : -1.0;
            auto G = [&](int k) { return K({x1, wall + s * k * h}, y); };
            const cplx d = (-11.0 * G(0) + 18.0 * G(1) - 9.0 * G(2) + 2.0 * G(3)) / (6.0 * h);
            CHECK(std::abs(d) < 1e-8);
        }
    }
}

TEST_CASE("Helmholtz equation and unit source strength")
{
    const QPKernel K(params(1.9, 44.0));
    const Point y{0.1, 0.17};
    const double h = 1e-3;
    for (Point x : {Point{0.4, 0.3}, Point{-0.2, 0.1}, Point{0.9, 0.45}}) {
        const cplx c = K(x, y);
        const cplx lap = (K(x + Point{h, 0}, y) + K(x - Point{h, 0}, y) + K(x + Point{0, h}, y) +
                          K(x - Point{0, h}, y) - 4.0 * c) /
                         (h * h);
        CHECK(std::abs(lap + 44.0 * c) < 1e-3 * 44.0 * std::abs(c) + 1e-6);
    }
    // outward flux through a small circle is +1, so G ~ +log(r) / (2 pi)
    const double rho = 1e-3, eps = 1e-5;
    const int m = 64;
    cplx flux = 0.0;
    for (int k = 0; k < m; ++k) {
        const double t = kTwoPi * k / m;
        const Point e{std::cos(t), std::sin(t)};
        flux += (K(y + (rho + eps) * e, y) - K(y + (rho - eps) * e, y)) / (2.0 * eps) * (rho * kTwoPi / m);
    }
    CHECK(std::abs(flux - 1.0) < 1e-3);
}

TEST_CASE("truncation converges exponentially")
{
    const KernelParams a = params(2.0, kLamStar);
    KernelParams b = a;
    b.m_trunc = 32;
    PairGen g;
    for (int i = 0; i < 40; ++i) {
        const Point x = g.point(), y = g.point();
        if (std::abs(x.x1 - y.x1) < 0.05) continue;
        CHECK(std::abs(eval_Ge(x, y, a) - eval_Ge(x, y, b)) < 1e-10);
    }
    const QPKernel K(a);
    const Point x{0.2, 0.3}, y{0.21, 0.12};
    const cplx ref = K.series_n(x, y, 400);
    for (int m = 4; m <= 16; m += 4) {
        const double e0 = std::abs(K.series_m(x, y, m) - ref);
        const double e1 = std::abs(K.series_m(x, y, m + 4) - ref);
        CHECK(e1 < 0.5 * e0);
    }
}

TEST_CASE("near-diagonal split")
{
    const KernelParams kp = params(2.9, kLamStar);
    const QPKernel K(kp);
    const Point x{0.31, 0.22};
    for (double r : {0.09, 0.07, 0.05}) {
        const Point y = x + Point{0.6 * r, -0.8 * r};
        const auto s = eval_Ge_split(x, y, kp);
        CHECK(s.log_coeff == 1.0 / kTwoPi);
        CHECK(std::abs(s.log_coeff * std::log(r) + s.smooth_part - K.series_n(x, y, 420)) < 1e-9);
        CHECK(std::abs(s.log_coeff * std::log(r) + s.smooth_part - K.series_m(x, y, 420)) < 1e-9);
    }
    const auto a = eval_Ge_split(x, x + Point{1e-8, 0.0}, kp);
    const auto b = eval_Ge_split(x, x + Point{0.0, 1e-6}, kp);
    CHECK(std::isfinite(a.smooth_part.real()));
    CHECK(std::abs(a.smooth_part - b.smooth_part) < 1e-4);
    CHECK_THROWS_AS(eval_Ge_split(x, x + Point{0.2, 0.0}, kp), Error);
    // wall-image singularities are also resolved
    const Point w{0.0, 0.004};
    const Point v = w + Point{0.02, 0.003};
    CHECK(std::abs(K(w, v) - K.series_n(w, v, 420)) < 1e-9);
}

TEST_CASE("regularized parts with complex spectral parameter")
{
    const KernelParams kp = params(1.3, cplx(50.0, 0.7));
    const QPKernel K(kp);
    const Point x{0.1, 0.2}, y{0.13, 0.18};
    CHECK(std::abs(K(x, y) - K.series_n(x, y, 420)) < 1e-9);
    CHECK(std::abs(K.series_m({0.1, 0.2}, {0.5, 0.4}, 200) - K.series_n({0.1, 0.2}, {0.5, 0.4}, 200)) < 1e-12);
}

TEST_CASE("singular frequency guard")
{
    CHECK_THROWS_AS(QPKernel(params(kPi, kPi * kPi)), Error);
    CHECK_THROWS_AS(QPKernel(params(kPi, 5.0 * kPi * kPi)), Error);
    CHECK_THROWS_AS(QPKernel(params(1.0, 1.0)), Error);
    CHECK_THROWS_AS(QPKernel(params(1.0, 1.0 + 4.0 * kPi * kPi + 5e-7)), Error);
    KernelParams bad = params(1.0, 30.0);
    bad.m_trunc = 4;
    CHECK_THROWS_AS(QPKernel(bad), Error);
    CHECK_NOTHROW(QPKernel(params(1.0, 30.0)));
    CHECK_THROWS_AS(eval_Ge({0.1, 0.1}, {0.1, 0.1}, params(1.0, 30.0)), Error);
    try {
        QPKernel(params(kPi, 5.0 * kPi * kPi));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Kernel);
    }
}

TEST_CASE("parameter derivatives")
{
    const KernelParams kp = params(kPi, kLamStar);
    const Point x{0.2, 0.3}, y{0.71, 0.14};
    // the real part of the symmetric combination is even in p about pi
    const cplx dsym = kernel_derivative(Deriv::dP, x, y, kp, 1e-4) + kernel_derivative(Deriv::dP, y, x, kp, 1e-4);
    CHECK(std::abs(dsym.real()) < 1e-6);
    for (Deriv w : {Deriv::dP, Deriv::dLambda}) {
        const cplx d1 = kernel_derivative(w, x, y, kp, 1e-4);
        const cplx d2 = kernel_derivative(w, x, y, kp, 5e-5);
        CHECK(std::abs(d1 - d2) < 1e-4 * std::abs(d2));
    }
    CHECK_THROWS_AS(kernel_derivative(Deriv::dP, x, y, kp, 1e-2), Error);
    CHECK_THROWS_AS(kernel_derivative(Deriv::dLambda, x, y, kp, 1e-8), Error);
}

TEST_CASE("special functions")
{
    // J0(2.404825557695773) = 0
    CHECK(std::abs(bessel_j0_sq(2.404825557695773 * 2.404825557695773)) < 1e-14);
    CHECK(std::abs(bessel_j0_sq(1.0) - 0.7651976865579666) < 1e-15);
    // closed-form polylog expansion against the defining series
    for (cplx w : {cplx(-0.3, 1.2), cplx(-1.0, -2.5), cplx(-2.0, 3.0), cplx(-0.05, 0.01)}) {
        const auto [l2, l3] = polylog23_exp(w);
        const cplx z = std::exp(w);
        cplx s2 = 0.0, s3 = 0.0, zn = z;
        for (int n = 1; n < 200000; ++n) {
            s2 += zn / double(n) / double(n);
            s3 += zn / double(n) / double(n) / double(n);
            zn *= z;
        }
        CHECK(std::abs(l2 - s2) < 1e-10);
        CHECK(std::abs(l3 - s3) < 1e-12);
    }
}
