#pragma once

#include "errors.hpp"
#include "geometry.hpp"

#include <array>
#include <cmath>
#include <complex>

namespace wgdirac {

using cplx = std::complex<double>;

// J0(z) given z^2, by its power series. Accurate for |z| up to about 20.
inline cplx bessel_j0_sq(cplx z2)
{
    if (std::abs(z2) > 400.0)
        fail(ErrorKind::Domain, "Bessel series argument too large");
    const cplx q = -0.25 * z2;
    cplx term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / double(k * k);
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

// 1 - J0(z) given z^2, without cancellation for small z.
inline cplx one_minus_j0_sq(cplx z2)
{
    const cplx q = -0.25 * z2;
    cplx term = 1.0, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / double(k * k);
        sum -= term;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

inline cplx expm1c(cplx z)
{
    if (std::abs(z) > 0.5) return std::exp(z) - 1.0;
    cplx term = z, sum = z;
    for (int k = 2; k < 40; ++k) {
        term *= z / double(k);
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

namespace detail {

struct PolylogTable {
    static constexpr int kTerms = 60;
    std::array<double, kTerms + 1> c2{};
    std::array<double, kTerms + 1> c3{};
    PolylogTable()
    {
        for (int m = 1; m <= kTerms; ++m) {
            double zeta = 0.0;
            if (m == 1) {
                zeta = kPi * kPi / 6.0;
            } else {
                zeta = std::pow(200.5, 1.0 - 2.0 * m) / (2.0 * m - 1.0);
                for (int j = 200; j >= 1; --j) zeta += std::pow(double(j), -2.0 * m);
            }
            const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
            c2[m] = sgn * 2.0 * zeta / (std::pow(kTwoPi, 2.0 * m) * (2.0 * m) * (2.0 * m + 1.0));
            c3[m] = c2[m] / (2.0 * m + 2.0);
        }
    }
};

inline const PolylogTable& polylog_table()
{
    static const PolylogTable t;
    return t;
}

} // namespace detail

// Li2(e^w) and Li3(e^w) for Re w <= 0, Im w in (-pi, pi].
inline std::pair<cplx, cplx> polylog23_exp(cplx w)
{
    constexpr double zeta2 = kPi * kPi / 6.0;
    constexpr double zeta3 = 1.2020569031595942854;
    if (std::abs(w) < 3.0) {
        if (w == cplx(0.0)) return {zeta2, zeta3};
        const auto& t = detail::polylog_table();
        const cplx lg = std::log(-w);
        const cplx w2 = w * w;
        cplx li2 = zeta2 + w * (1.0 - lg) - 0.25 * w2;
        cplx li3 = zeta3 + zeta2 * w + 0.5 * w2 * (1.5 - lg) - w2 * w / 12.0;
        cplx pw = w2 * w; // w^(2m+1)
        for (int m = 1; m <= detail::PolylogTable::kTerms; ++m) {
            const cplx d2 = t.c2[m] * pw;
            const cplx d3 = t.c3[m] * pw * w;
            li2 += d2;
            li3 += d3;
            if (std::abs(d2) < 1e-18 && std::abs(d3) < 1e-18) break;
            pw *= w2;
        }
        return {li2, li3};
    }
    const cplx z = std::exp(w);
    cplx zn = z, li2 = 0.0, li3 = 0.0;
    for (int n = 1; n < 400; ++n) {
        const double dn = n;
        li2 += zn / (dn * dn);
        li3 += zn / (dn * dn * dn);
        if (std::abs(zn) < 1e-18) break;
        zn *= z;
    }
    return {li2, li3};
}

// Kress weight for the periodic log kernel log(4 sin^2((t - s)/2)) on 2n
// equispaced nodes over [0, 2pi), evaluated at separation tau = t - s.
inline double kress_weight(int n, double tau)
{
    double s = 0.0;
    for (int m = 1; m < n; ++m) s += std::cos(m * tau) / m;
    return -kTwoPi / n * s - kPi / (double(n) * n) * std::cos(n * tau);
}

} // namespace wgdirac
